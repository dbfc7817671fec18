"""Virtual remote-centre-of-motion arm control and targeting-experiment simulator."""
__version__ = "0.1.0"
