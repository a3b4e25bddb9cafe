from typing import List, Optional


class ConsertError(Exception):
    code = "CONSERT_ERROR"

    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def __str__(self) -> str:
        return f"{self.code}: {self.args[0]}"


class ParseError(ConsertError):
    code = "PARSE_FAILED"

    def __init__(self, message: str, diagnostics: List = None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class ValidationError(ConsertError):
    code = "VALIDATION_FAILED"

    def __init__(self, message: str, diagnostics: List = None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class EvaluationError(ConsertError):
    code = "EVALUATION_FAILED"


class CompositionError(ConsertError):
    code = "COMPOSITION_FAILED"


class RegistryError(ConsertError):
    code = "REGISTRY_FAILED"


class SessionError(ConsertError):
    code = "SESSION_FAILED"


class ScenarioError(ConsertError):
    code = "SCENARIO_FAILED"
