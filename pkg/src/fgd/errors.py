"""Exception hierarchy. Every error raised by the library derives from FgdError."""


class FgdError(Exception):
    pass


class ShapeError(FgdError, ValueError):
    pass


class NonFiniteError(FgdError, ValueError):
    pass


class NotSymmetricError(FgdError, ValueError):
    pass


class NotOrthonormalError(FgdError, ValueError):
    pass


class SingularMatrixError(FgdError, ValueError):
    pass


class ConvergenceError(FgdError, RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class OffNeighborhoodError(FgdError, RuntimeError):
    """||theta^T theta - I|| >= 1: the Gram matrix may be singular and the
    feedback guarantee is void."""

    def __init__(self, distance, step=None):
        where = "" if step is None else f" at step {step}"
        super().__init__(f"theta left the neighbourhood ||theta^T theta - I|| < 1{where}: d={distance:.6g}")
        self.distance = distance
        self.step = step


class OffBundleError(FgdError, ValueError):
    pass


class NumericalBlowupError(FgdError, FloatingPointError):
    def __init__(self, message, step=None, time=None):
        ctx = []
        if step is not None:
            ctx.append(f"step={step}")
        if time is not None:
            ctx.append(f"t={time:.6g}")
        super().__init__(message + (f" ({', '.join(ctx)})" if ctx else ""))
        self.step = step
        self.time = time


class DriftAbortError(FgdError, RuntimeError):
    def __init__(self, distance, limit, v_value=None, phi_norm=None, step=None, group=None):
        parts = [f"d={distance:.6g} >= drift_abort={limit:g}"]
        if v_value is not None:
            parts.append(f"V={v_value:.6g}")
        if phi_norm is not None:
            parts.append(f"|phi|={phi_norm:.6g}")
        if step is not None:
            parts.append(f"step={step}")
        if group is not None:
            parts.append(f"group={group}")
        super().__init__("drift abort: " + ", ".join(parts))
        self.distance = distance
        self.limit = limit
        self.v_value = v_value
        self.phi_norm = phi_norm
        self.step = step
        self.group = group


class ConfigError(FgdError, ValueError):
    pass
