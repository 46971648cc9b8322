"""Snake-robot loco-manipulation toolkit: articulated-chain dynamics with
penalty contact, CPG gaits, and contact-implicit trajectory optimization."""

__version__ = "0.1.0"
