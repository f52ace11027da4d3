import json
import logging
import re
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from src.tdoa.errors import ConfigParseError, ConfigurationError, CovarianceError, ValidationError
from src.tdoa.services.optimizers import ALL_ALGORITHMS, OptimizerConfig
from src.tdoa.services.scenarios import (
    MatrixCovariance,
    PerReceiverCovariance,
    Scenario,
    UniformCovariance,
    get_preset,
)
from src.tdoa.services.signal_frontend import SignalParams

logger = logging.getLogger(__name__)

TOP_KEYS = {"scenario", "optimizers"}
SCENARIO_KEYS = {
    "name",
    "receivers",
    "true_position",
    "covariance",
    "initial_position",
    "iterations",
    "measurement_source",
    "noise_free",
    "resample_each_iteration",
    "signal",
}
REQUIRED_SCENARIO_KEYS = ("receivers", "true_position", "covariance")
SIGNAL_KEYS = {
    "sample_rate",
    "num_samples",
    "noise_stddev",
    "propagation_speed",
    "waveform_kind",
    "burst_samples",
    "max_lag",
    "subsample",
}
OPTIMIZER_KEYS = {
    "algorithm",
    "learning_rate",
    "momentum",
    "decay",
    "decay1",
    "decay2",
    "decay_threshold",
    "smoothing",
    "buffer_size",
}
INTEGER_KEYS = {"iterations", "num_samples", "burst_samples", "max_lag", "buffer_size"}

# scenario.receivers[2][0] -> "scenario", "receivers", 2, 0
_PATH_PART = re.compile(r"([^.\[\]]+)|\[(\d+)\]")
_DECODER = json.JSONDecoder()


class _Parser:
    """Строгий разбор документа: неизвестные ключи отклоняются, ошибки указывают поле и строку."""

    def __init__(self, text: str):
        self.text = text

    def _skip_blank(self, pos: int) -> int:
        while pos < len(self.text) and self.text[pos] in " \t\r\n":
            pos += 1
        return pos

    def _child(self, pos: int, part: Union[str, int]) -> Optional[Tuple[int, int]]:
        """(начало ключа или элемента, начало значения) для одного шага пути."""
        text = self.text
        if not text.startswith("{" if isinstance(part, str) else "[", pos):
            return None
        pos = self._skip_blank(pos + 1)
        index = 0
        while pos < len(text) and text[pos] not in "}]":
            anchor = pos
            if isinstance(part, str):
                key, pos = json.decoder.scanstring(text, pos + 1)
                # пропуск ':'
                pos = self._skip_blank(self._skip_blank(pos) + 1)
                if key == part:
                    return anchor, pos
            elif index == part:
                return anchor, pos
            _, pos = _DECODER.raw_decode(text, pos)
            pos = self._skip_blank(pos)
            if text.startswith(",", pos):
                pos = self._skip_blank(pos + 1)
            index += 1
        return None

    def line_of(self, field: str) -> Optional[int]:
        """
        Строка поля в исходном тексте: путь проходится по документу, поэтому одинаковые
        ключи в разных элементах массива не путаются. Если поля нет (например, пропущен
        обязательный ключ), берётся строка ближайшего существующего родителя.
        """
        parts = [name or int(index) for name, index in _PATH_PART.findall(field)]
        if not parts:
            return None
        anchor = value = self._skip_blank(0)
        for part in parts:
            found = self._child(value, part)
            if found is None:
                break
            anchor, value = found
        return self.text.count("\n", 0, anchor) + 1

    def fail(self, message: str, field: str) -> ConfigParseError:
        return ConfigParseError(message, line=self.line_of(field), field=field)

    def obj(self, value: object, field: str, allowed: Set[str]) -> Dict[str, object]:
        if not isinstance(value, dict):
            raise self.fail("expected an object", field)
        unknown = sorted(set(value) - allowed)
        if unknown:
            prefix = f"{field}." if field else ""
            raise self.fail(f"unknown key '{unknown[0]}'", f"{prefix}{unknown[0]}")
        return value

    def number(self, value: object, field: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(f"expected a number, got {value!r}", field)
        return value

    def integer(self, value: object, field: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.fail(f"expected an integer, got {value!r}", field)
        return value

    def boolean(self, value: object, field: str) -> bool:
        if not isinstance(value, bool):
            raise self.fail(f"expected true/false, got {value!r}", field)
        return value

    def string(self, value: object, field: str) -> str:
        if not isinstance(value, str):
            raise self.fail(f"expected a string, got {value!r}", field)
        return value

    def point(self, value: object, field: str) -> Tuple[float, float]:
        if not isinstance(value, list) or len(value) != 2:
            raise self.fail("expected [x, y]", field)
        return (self.number(value[0], f"{field}[0]"), self.number(value[1], f"{field}[1]"))

    def scalar(self, key: str, value: object, field: str) -> object:
        if key in INTEGER_KEYS:
            return self.integer(value, field)
        return self.number(value, field)

    def covariance(self, value: object, field: str):
        spec = self.obj(value, field, {"diag", "offdiag", "matrix", "per_receiver"})
        kinds = [key for key in ("matrix", "per_receiver") if key in spec]
        if "diag" in spec or "offdiag" in spec:
            kinds.append("diag")
        if len(kinds) != 1:
            raise self.fail("give exactly one of diag/offdiag, matrix or per_receiver", field)

        if "matrix" in spec:
            rows = spec["matrix"]
            if not isinstance(rows, list) or not all(isinstance(row, list) for row in rows):
                raise self.fail("expected a list of rows", f"{field}.matrix")
            return MatrixCovariance(
                [[self.number(x, f"{field}.matrix[{i}]") for x in row] for i, row in enumerate(rows)]
            )
        if "per_receiver" in spec:
            inner = self.obj(spec["per_receiver"], f"{field}.per_receiver", {"sigmas", "pair_sigma"})
            sigmas = inner.get("sigmas")
            if not isinstance(sigmas, list) or not sigmas:
                raise self.fail("expected a non-empty list", f"{field}.per_receiver.sigmas")
            pair_sigma = self.number(inner.get("pair_sigma"), f"{field}.per_receiver.pair_sigma")
            if not pair_sigma > 0:
                raise ValidationError(f"{field}.per_receiver.pair_sigma", "must be > 0")
            return PerReceiverCovariance(
                tuple(self.number(s, f"{field}.per_receiver.sigmas[{i}]") for i, s in enumerate(sigmas)),
                pair_sigma,
            )
        if "diag" not in spec or "offdiag" not in spec:
            raise self.fail("diag and offdiag must be given together", field)
        return UniformCovariance(self.number(spec["diag"], f"{field}.diag"), self.number(spec["offdiag"], f"{field}.offdiag"))

    def signal(self, value: object, field: str) -> Optional[SignalParams]:
        if value is None:
            return None
        spec = self.obj(value, field, SIGNAL_KEYS)
        kwargs: Dict[str, object] = {}
        for key, item in spec.items():
            path = f"{field}.{key}"
            if key == "waveform_kind":
                kwargs[key] = self.string(item, path)
            elif key == "subsample":
                kwargs[key] = self.boolean(item, path)
            elif key == "max_lag" and item is None:
                kwargs[key] = None
            else:
                kwargs[key] = self.scalar(key, item, path)
        try:
            return SignalParams(**kwargs)
        except ValueError as exc:
            if isinstance(exc, ValidationError):
                raise ValidationError(f"{field}.{exc.field}", exc.message) from exc
            raise ValidationError(f"{field}.waveform_kind", str(exc)) from exc

    def scenario(self, value: object) -> Scenario:
        if isinstance(value, str):
            try:
                return get_preset(value)
            except ConfigurationError as exc:
                raise self.fail(str(exc), "scenario") from exc

        spec = self.obj(value, "scenario", SCENARIO_KEYS)
        for key in REQUIRED_SCENARIO_KEYS:
            if key not in spec:
                raise self.fail(f"missing required key '{key}'", f"scenario.{key}")

        receivers = spec["receivers"]
        if not isinstance(receivers, list):
            raise self.fail("expected a list of [x, y]", "scenario.receivers")
        kwargs: Dict[str, object] = {
            "name": self.string(spec.get("name", "custom"), "scenario.name"),
            "receivers": [self.point(p, f"scenario.receivers[{i}]") for i, p in enumerate(receivers)],
            "true_position": self.point(spec["true_position"], "scenario.true_position"),
            "covariance": self.covariance(spec["covariance"], "scenario.covariance"),
            "signal": self.signal(spec.get("signal"), "scenario.signal"),
        }
        if spec.get("initial_position") is not None:
            kwargs["initial_position"] = self.point(spec["initial_position"], "scenario.initial_position")
        if "iterations" in spec:
            kwargs["iterations"] = self.integer(spec["iterations"], "scenario.iterations")
        if "measurement_source" in spec:
            kwargs["measurement_source"] = self.string(spec["measurement_source"], "scenario.measurement_source")
        for key in ("noise_free", "resample_each_iteration"):
            if key in spec:
                kwargs[key] = self.boolean(spec[key], f"scenario.{key}")

        try:
            return Scenario(**kwargs)
        except ValidationError as exc:
            raise ValidationError(f"scenario.{exc.field}", exc.message) from exc
        except CovarianceError as exc:
            raise ValidationError("scenario.covariance", str(exc)) from exc
        except ConfigurationError as exc:
            raise ValidationError("scenario.measurement_source", str(exc)) from exc

    def optimizer(self, value: object, field: str) -> OptimizerConfig:
        if isinstance(value, str):
            value = {"algorithm": value}
        spec = self.obj(value, field, OPTIMIZER_KEYS)
        if "algorithm" not in spec:
            raise self.fail("missing required key 'algorithm'", f"{field}.algorithm")
        kwargs: Dict[str, object] = {"algorithm": self.string(spec["algorithm"], f"{field}.algorithm")}
        for key, item in spec.items():
            if key != "algorithm":
                kwargs[key] = self.scalar(key, item, f"{field}.{key}")
        try:
            return OptimizerConfig(**kwargs)
        except ValidationError as exc:
            raise ValidationError(f"{field}.{exc.field}", exc.message) from exc
        except ConfigurationError as exc:
            raise self.fail(str(exc), f"{field}.algorithm") from exc

    def optimizers(self, value: object) -> List[OptimizerConfig]:
        if value is None:
            return [OptimizerConfig(algorithm) for algorithm in ALL_ALGORITHMS]
        if not isinstance(value, list) or not value:
            raise self.fail("expected a non-empty list", "optimizers")
        configs = [self.optimizer(item, f"optimizers[{i}]") for i, item in enumerate(value)]
        seen = set()
        for i, config in enumerate(configs):
            if config.algorithm in seen:
                raise self.fail(f"duplicate algorithm {config.algorithm.value}", f"optimizers[{i}].algorithm")
            seen.add(config.algorithm)
        return configs


def parse_config(text: str) -> Tuple[Scenario, List[OptimizerConfig]]:
    """Разбор документа конфигурации (JSON). Незаданные параметры оптимизаторов берутся по умолчанию."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"malformed document: {exc.msg}", line=exc.lineno) from exc

    parser = _Parser(text)
    document = parser.obj(document, "", TOP_KEYS)
    if "scenario" not in document:
        raise ConfigParseError("missing required key 'scenario'", field="scenario")
    scenario = parser.scenario(document["scenario"])
    configs = parser.optimizers(document.get("optimizers"))
    logger.debug(f"[CONFIG] scenario={scenario.name} optimizers={[c.algorithm.value for c in configs]}")
    return scenario, configs


def scenario_to_dict(scenario: Scenario) -> Dict[str, object]:
    signal = None
    if scenario.signal is not None:
        params = scenario.signal
        signal = {
            "sample_rate": params.sample_rate,
            "num_samples": params.num_samples,
            "noise_stddev": params.noise_stddev,
            "propagation_speed": params.propagation_speed,
            "waveform_kind": params.waveform_kind.value,
            "burst_samples": params.burst_samples,
            "max_lag": params.max_lag,
            "subsample": params.subsample,
        }
    return {
        "name": scenario.name,
        "receivers": scenario.receivers.positions.tolist(),
        "true_position": scenario.true_position.tolist(),
        "covariance": scenario.covariance.as_dict(),
        "initial_position": None if scenario.initial_position is None else scenario.initial_position.tolist(),
        "iterations": scenario.iterations,
        "measurement_source": scenario.measurement_source.value,
        "noise_free": scenario.noise_free,
        "resample_each_iteration": scenario.resample_each_iteration,
        "signal": signal,
    }


def dump_config(scenario: Scenario, configs: Sequence[OptimizerConfig]) -> str:
    """Каноническая форма документа, которую parse_config принимает обратно."""
    document = {
        "scenario": scenario_to_dict(scenario),
        "optimizers": [config.as_dict() for config in configs],
    }
    return json.dumps(document, indent=2) + "\n"
