"""
Solver de soluciones topológicas del sistema de Chern–Simons antisimétrico
en retículos ℤⁿ: esquema monótono en cajas, agotamiento, función de Green
y verificaciones asintóticas.
"""
__version__ = "1.0.0"
