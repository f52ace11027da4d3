from typing import Optional


class TdoaError(Exception):
    """Базовое исключение пакета."""


class InvalidArgumentError(TdoaError, ValueError):
    pass


class DegenerateChannelError(TdoaError, ValueError):
    pass


class DegenerateSignalError(TdoaError, ValueError):
    """Нулевая энергия сигнала: знаменатель NCC обращается в ноль."""

    def __init__(self, message: str, receiver_id: Optional[int] = None):
        super().__init__(message)
        self.receiver_id = receiver_id


class CovarianceError(TdoaError, ValueError):
    pass


class SingularityError(TdoaError, ArithmeticError):
    """Точка совпала с приёмником: единичный вектор не определён."""

    def __init__(self, message: str, receiver_id: Optional[int] = None):
        super().__init__(message)
        self.receiver_id = receiver_id


class NumericError(TdoaError, ArithmeticError):
    pass


class ConfigurationError(TdoaError):
    pass


class ConfigParseError(ConfigurationError):
    """Ошибка разбора документа конфигурации (строка и/или поле)."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field '{field}'")
        text = f"{message} ({', '.join(location)})" if location else message
        super().__init__(text)
        self.line = line
        self.field = field


class ValidationError(ConfigurationError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class RunFailure(TdoaError):
    """Хотя бы один прогон завершился расходимостью или сингулярностью."""


# Коды возврата CLI
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUN_FAILURE = 2
EXIT_IO = 3


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, RunFailure):
        return EXIT_RUN_FAILURE
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (ConfigurationError, CovarianceError, InvalidArgumentError)):
        return EXIT_VALIDATION
    return EXIT_RUN_FAILURE
