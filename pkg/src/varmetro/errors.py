class NumericalError(ArithmeticError):
    """A computation produced a value outside its mathematically allowed range."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage
