"""framelens: video frames -> vision-language detections -> validated artifacts."""

__version__ = "0.1.0"
