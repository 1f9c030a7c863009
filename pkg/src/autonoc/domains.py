from enum import Enum


class DomainId(str, Enum):
    """Administrative slices of the network, each with its own controller."""

    BACKBONE_A = "backbone-A"
    BACKBONE_B = "backbone-B"
    DCI_METRO = "dci-metro"
    INTRA_DC = "intra-dc"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, value) -> "DomainId":
        if isinstance(value, cls):
            return value
        for member in cls:
            if member.value == value or member.name == value:
                return member
        raise ValueError(f"unknown domain {value!r}")


BACKBONE_DOMAINS = (DomainId.BACKBONE_A, DomainId.BACKBONE_B)
