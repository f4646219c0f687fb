"""hapsim: discrete-event simulation of HAPS-buffered optical satellite backhaul.

Quantifies how stratospheric relay nodes with store-and-forward buffers
improve free-space-optical data delivery from a LEO satellite to the ground
under weather-induced link failures.
"""

__version__ = "0.1.0"
