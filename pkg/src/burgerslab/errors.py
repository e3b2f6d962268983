"""Error types. Each carries a stable machine-readable ``code``."""


class BurgersError(Exception):
    code = "BURGERS_ERROR"

    def __init__(self, message=""):
        super().__init__(f"{self.code}: {message}" if message else self.code)


class MinimizerNotBracketed(BurgersError):
    code = "MINIMIZER_NOT_BRACKETED"


class RootNotConverged(BurgersError):
    code = "ROOT_NOT_CONVERGED"


class MergeAmbiguous(BurgersError):
    code = "MERGE_AMBIGUOUS"


class QuadratureFail(BurgersError):
    code = "QUADRATURE_FAIL"


class ShockEventAtT(BurgersError):
    code = "SHOCK_EVENT_AT_T"


class T0TooLate(BurgersError):
    code = "T0_TOO_LATE"


class OutOfSupport(BurgersError):
    code = "OUT_OF_SUPPORT"


class AtomWindowOverlap(BurgersError):
    code = "ATOM_WINDOW_OVERLAP"


class StepTooCoarse(BurgersError):
    code = "STEP_TOO_COARSE"


class VarianceBlowup(BurgersError):
    code = "VARIANCE_BLOWUP"


class ConfigInvalid(BurgersError):
    code = "CONFIG_INVALID"


class IOFailure(BurgersError):
    code = "IO_ERROR"
