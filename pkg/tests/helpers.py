"""Shared fixtures-by-hand for the unit tests."""

from dataclasses import dataclass


@dataclass
class Blob:
    """Minimal PDU stand-in for driving a link directly."""

    ident: int
    wire_size: int = 1500


class Recorder:
    def __init__(self, sim):
        self.sim = sim
        self.items = []

    def __call__(self, pdu, link_id):
        self.items.append((self.sim.now, pdu, link_id))
