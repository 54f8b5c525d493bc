"""Best simultaneous approximations of (1/beta, 1/beta^2) for cubic Pisot units."""
__version__ = "0.1.0"
