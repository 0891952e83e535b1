"""
Frostlab Source Package
"""
