"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Tensor shapes are incompatible with an operation."""


class ContractError(ValueError):
    """A caller violated an API precondition."""


class PreconditionError(ValueError):
    """Input does not meet a documented precondition (e.g. chunk alignment)."""


class EmptyInputError(ValueError):
    pass


class CapacityError(ValueError):
    """Sequence longer than the model or embedding table supports."""


class VocabularyError(ValueError):
    """Token id outside the event vocabulary."""


class MidiParseError(ValueError):
    """Malformed Standard MIDI File. ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ValidationError(ValueError):
    pass


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, name: str):
        super().__init__(f"non-finite gradient in parameter {name!r}")
        self.name = name


class TrainingDiverged(RuntimeError):
    pass
