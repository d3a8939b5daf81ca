"""Full-duplex link simulator with analog-baseband self-interference cancellation."""

__version__ = "0.1.0"
