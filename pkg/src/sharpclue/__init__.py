"""Self-supervised handheld video deblurring driven by in-video sharp clues."""

__version__ = "0.1.0"
