"""Maximum same-color rectangle matchings of random bichromatic point sets."""

__version__ = "0.1.0"
