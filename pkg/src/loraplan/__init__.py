"""LoRaWAN coverage and link planning for obstructed sites."""

__version__ = "0.1.0"
