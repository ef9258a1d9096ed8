"""Energy and battery-lifetime model for NB-IoT and LTE-M modems."""

__version__ = "0.1.0"
