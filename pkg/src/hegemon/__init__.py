"""Leader-follower club-goods game between two superpowers."""

__version__ = "0.1.0"
# version of the documented CLI/JSON contract, bumped on breaking format changes
INTERFACE_VERSION = "1.0"
