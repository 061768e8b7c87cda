"""Configuración y ejecución de experimentos reproducibles."""
