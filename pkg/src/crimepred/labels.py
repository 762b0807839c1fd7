"""Canonical crime-type labels and their integer encoding.

The 33 label names map bijectively onto indices 0..32. Matching is
case-insensitive and whitespace-normalized, so CSV exports with stray
spacing or casing still encode cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LabelError, UnknownLabelError

CLASS_NAMES: tuple[str, ...] = (
    "Aggravated Assault Firearm",
    "Aggravated Assault No Firearm",
    "All Other Offenses",
    "Arson",
    "Burglary Non-Residential",
    "Burglary Residential",
    "Driving Under Influence",
    "Disorderly Conduct",
    "Embezzlement",
    "Forgery and Counterfeiting",
    "Fraud",
    "Gambling Violations",
    "Homicide - Criminal",
    "Homicide - Gross Negligence",
    "Homicide - Justifiable",
    "Liquor Law Violations",
    "Motor Vehicle Theft",
    "Narcotic / Drug Law Violations",
    "Offenses Against Family and Children",
    "Other Assaults",
    "Other Sex Offenses (Not Commercialized)",
    "Prostitution and Commercialized Vice",
    "Public Drunkenness",
    "Rape",
    "Receiving Stolen Property",
    "Recovered Stolen Motor Vehicle",
    "Robbery Firearm",
    "Robbery No Firearm",
    "Theft from Vehicle",
    "Thefts",
    "Vagrancy/Loitering",
    "Vandalism/Criminal Mischief",
    "Weapon Violations",
)

CLASS_COUNT = len(CLASS_NAMES)


@dataclass(frozen=True, slots=True)
class ClassLabel:
    index: int
    name: str


def normalize_label_text(text: str) -> str:
    """Collapse internal whitespace, strip, and casefold for matching."""
    return " ".join(text.split()).casefold()


_NAME_TO_INDEX = {normalize_label_text(name): i for i, name in enumerate(CLASS_NAMES)}
assert len(_NAME_TO_INDEX) == CLASS_COUNT


def encode_label(name: str) -> ClassLabel:
    """Map a label name onto its canonical ClassLabel.

    Raises UnknownLabelError when the (normalized) name is not one of the
    33 canonical label names.
    """
    idx = _NAME_TO_INDEX.get(normalize_label_text(name))
    if idx is None:
        raise UnknownLabelError(name)
    return ClassLabel(idx, CLASS_NAMES[idx])


def decode_label(index: int) -> ClassLabel:
    """ClassLabel for an integer index in [0, 33)."""
    if not 0 <= index < CLASS_COUNT:
        raise LabelError(f"label index {index} outside [0, {CLASS_COUNT})")
    return ClassLabel(index, CLASS_NAMES[index])
