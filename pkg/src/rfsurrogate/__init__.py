"""Over-the-air adversarial attacks on a spectrum-sensing CNN with channel-mismatched surrogates."""

__version__ = "0.1.0"
