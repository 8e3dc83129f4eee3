"""Class labels and their canonical ordering."""

NOVICE = "Novice"
INTERMEDIATE = "Intermediate"
EXPERT = "Expert"
NO_EVENT = "NoEvent"
CONFUSION_EVENT = "ConfusionEvent"

EXPERTISE_CLASSES = (NOVICE, INTERMEDIATE, EXPERT)
EVENT_CLASSES = (NO_EVENT, CONFUSION_EVENT)
CLASS_ORDER = EXPERTISE_CLASSES + EVENT_CLASSES

# "advanced" is the surgeon/VR studies' name for the middle class
_ALIASES = {
    "novice": NOVICE,
    "intermediate": INTERMEDIATE,
    "advanced": INTERMEDIATE,
    "expert": EXPERT,
    "noevent": NO_EVENT,
    "no_event": NO_EVENT,
    "confusionevent": CONFUSION_EVENT,
    "confusion_event": CONFUSION_EVENT,
    "confusion": CONFUSION_EVENT,
}


def normalize_label(label):
    if label is None:
        return None
    key = str(label).strip().lower().replace(" ", "")
    if key not in _ALIASES:
        raise ValueError(f"unknown class label {label!r}")
    return _ALIASES[key]


def canonical_order(labels):
    """Sort a collection of labels into the fixed tie-breaking order."""
    uniq = set(labels)
    known = [c for c in CLASS_ORDER if c in uniq]
    extra = sorted(uniq.difference(CLASS_ORDER))
    return known + extra
