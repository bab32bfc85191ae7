"""engel_forge: curve-family Engel structures on D3 x [0,1], the four-leaf
clover filling deformation, and independent numerical Engel verification."""

__version__ = "0.1.0"
