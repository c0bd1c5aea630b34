"""
occufield: textured mesh reconstruction from a single image with occupancy
fields, backside refinement and two-view fusion
"""

__version__ = "0.1.0"
