"""Pluggable acquisition of the three score signals.

E comes from an element-extraction model, V from per-element visual QA over
the sketch, P from a zero-shot classifier endpoint. Transport is a single
generic JSON-over-HTTP POST (chat-completion shape with an optional base64
image part; classification uses a {model, image_base64, labels} payload and
returns per-label scores). Per-model quirks live entirely in prompt style and
parsing, never in transport.

Every remote call is retried up to max_retries times and can be backed by a
content-addressed on-disk cache (sha256 over the model name and the full
request payload, which embeds prompt text and image bytes). Cache writes are
atomic and per-key single-flight, so concurrent duplicate calls produce one
network request.

Offline use: `FixtureProvider` serves Signals straight from ground-truth
annotations plus a sidecar probability file, letting the whole pipeline run
with no network.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from functools import wraps
from pathlib import Path
from typing import Callable

import numpy as np
import requests

from .core import Provenance, Signals
from .dataset import CommonsenseDB, DatasetError, Element, SketchRecord, parse_element
from . import prompts

__all__ = [
    "ProviderError",
    "ExtractionError",
    "ProviderConfig",
    "VqaResult",
    "ClassifierResult",
    "ResponseCache",
    "extract_commonsense",
    "annotate_elements",
    "classify",
    "cached",
    "FixtureProvider",
]

PROMPT_STYLES = ("structured_json", "per_element_yes_no", "molmo_json")
DEFAULT_LABEL_TEMPLATE = "a black line drawing of a {label}"
RETRY_BACKOFF_BASE = 0.1  # seconds; grows twofold per attempt, capped at 2 s

_SNAKE_CASE = re.compile(r"^[a-z0-9]+(?:_[a-z0-9]+)*$")
_YES_NO = re.compile(r"^[\s\"']*(yes|no)\b", re.IGNORECASE)


class ProviderError(RuntimeError):
    """Transport-level failure after exhausting the retry budget."""


class ExtractionError(ValueError):
    """Model output failed schema validation; carries the raw response text."""

    def __init__(self, message: str, raw_response: str = ""):
        super().__init__(message)
        self.raw_response = raw_response


@dataclass(frozen=True)
class ProviderConfig:
    endpoint_url: str
    model_name: str
    api_key_env: str = "SEA_API_KEY"
    timeout: float = 30.0
    max_retries: int = 2
    max_parallel: int = 4
    prompt_style: str = "structured_json"

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout!r}")
        if self.max_parallel < 1:
            raise ValueError(f"max_parallel must be >= 1, got {self.max_parallel!r}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries!r}")
        if self.prompt_style not in PROMPT_STYLES:
            raise ValueError(f"prompt_style must be one of {PROMPT_STYLES}, got {self.prompt_style!r}")

    @classmethod
    def from_json(cls, path) -> "ProviderConfig":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in obj.items() if k in known})


@dataclass(frozen=True)
class VqaResult:
    """Per-element presence verdicts for one sketch.

    parse_status: "ok" when the model answered exactly the queried element
    set, "repaired" when any element had to be defaulted or extra keys were
    dropped, "failed" when nothing usable came back (presence then all-false).
    """

    sketch_id: str
    presence: dict[str, bool]
    raw_response: str
    parse_status: str

    @property
    def visible_count(self) -> int:
        return sum(1 for present in self.presence.values() if present)


@dataclass(frozen=True)
class ClassifierResult:
    sketch_id: str
    probabilities: dict[str, float]
    ground_truth_prob: float


# --------------------------------------------------------------------------
# transport, retry, cache


def http_transport(payload: dict, config: ProviderConfig) -> dict:
    """POST the payload as JSON; returns the decoded JSON response."""
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    response = requests.post(config.endpoint_url, json=payload, headers=headers,
                             timeout=config.timeout)
    response.raise_for_status()
    return response.json()


class ResponseCache:
    """Content-addressed response store: cache_dir/<2 hex>/<sha256>.json.

    Entries are immutable once written; writes go through a temp file and an
    atomic rename. Per-key locks make concurrent identical calls single-flight
    within a process. Corrupt entries are ignored and recomputed.
    """

    def __init__(self, cache_dir):
        self.cache_dir = Path(cache_dir)
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def key_lock(self, key: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(key, threading.Lock())

    def _path(self, key: str) -> Path:
        return self.cache_dir / key[:2] / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        try:
            with open(path, encoding="utf-8") as fh:
                entry = json.load(fh)
            return entry["response"]
        except (OSError, json.JSONDecodeError, KeyError, TypeError):
            return None

    def put(self, key: str, model: str, response: dict) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {"request_hash": key, "model": model,
                 "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                 "response": response}
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def request_key(model_name: str, payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256()
    digest.update(model_name.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(canonical.encode("utf-8"))
    return digest.hexdigest()


def _call(payload: dict, config: ProviderConfig, transport: Callable | None,
          cache: ResponseCache | None) -> dict:
    """One logical request: cache lookup, retries, single-flight write."""
    transport = transport or http_transport
    if cache is None:
        return _call_with_retries(payload, config, transport)
    key = request_key(config.model_name, payload)
    hit = cache.get(key)
    if hit is not None:
        return hit
    with cache.key_lock(key):
        hit = cache.get(key)
        if hit is not None:
            return hit
        response = _call_with_retries(payload, config, transport)
        cache.put(key, config.model_name, response)
        return response


def _call_with_retries(payload: dict, config: ProviderConfig,
                       transport: Callable) -> dict:
    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        try:
            return transport(payload, config)
        except (requests.RequestException, ConnectionError, TimeoutError, OSError) as exc:
            last_error = exc
            if attempt < config.max_retries:
                time.sleep(min(RETRY_BACKOFF_BASE * (2 ** attempt), 2.0))
    raise ProviderError(
        f"{config.model_name}: request failed after {config.max_retries + 1} attempts: {last_error}"
    ) from last_error


def cached(op: Callable, cache_dir) -> Callable:
    """Wrap a provider operation so all its requests go through a disk cache."""
    cache = ResponseCache(cache_dir)

    @wraps(op)
    def wrapper(*args, **kwargs):
        kwargs.setdefault("cache", cache)
        return op(*args, **kwargs)

    return wrapper


def _chat_payload(config: ProviderConfig, text: str,
                  image_base64: str | None = None, system: str | None = None) -> dict:
    content: list[dict] = [{"type": "text", "text": text}]
    if image_base64 is not None:
        content.append({"type": "image", "image_base64": image_base64})
    messages = []
    if system is not None:
        messages.append({"role": "system", "content": [{"type": "text", "text": system}]})
    messages.append({"role": "user", "content": content})
    return {"model": config.model_name, "messages": messages}


def _response_text(response: dict) -> str:
    try:
        return response["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ProviderError(f"response has no message content: {response!r}") from None


def _encode_image(sketch_image) -> str | None:
    if sketch_image is None:
        return None
    if isinstance(sketch_image, bytes):
        return base64.b64encode(sketch_image).decode("ascii")
    return str(sketch_image)  # already base64 text; passed through opaquely


_FENCE = re.compile(r"^```[a-zA-Z0-9]*\s*|\s*```$", re.MULTILINE)


def parse_json_with_repair(text: str) -> tuple[object, bool]:
    """Parse model JSON; one repair pass strips code fences and trailing prose.

    Returns (value, repaired). Anything beyond that one pass raises
    json.JSONDecodeError: silently repairing model output is a correctness
    hazard.
    """
    try:
        return json.loads(text), False
    except json.JSONDecodeError:
        pass
    cleaned = _FENCE.sub("", text).strip()
    start = cleaned.find("{")
    end = cleaned.rfind("}")
    if start >= 0 and end > start:
        cleaned = cleaned[start:end + 1]
    return json.loads(cleaned), True


# --------------------------------------------------------------------------
# operations


def extract_commonsense(class_name: str, config: ProviderConfig,
                        transport: Callable | None = None,
                        cache: ResponseCache | None = None) -> list[Element]:
    """Ask the extraction model for the class's element list and validate it.

    Enforces the schema the prompt demands: total_elements must equal the
    element count, ids must be '<class>.<name>', names must be snake_case.
    """
    prompt = prompts.render_extraction(class_name)
    response = _call(_chat_payload(config, prompt), config, transport, cache)
    text = _response_text(response)
    try:
        obj, _repaired = parse_json_with_repair(text)
    except json.JSONDecodeError as exc:
        raise ExtractionError(f"{class_name}: invalid JSON after repair pass: {exc}",
                              raw_response=text) from exc
    if not isinstance(obj, dict):
        raise ExtractionError(f"{class_name}: expected a JSON object", raw_response=text)
    elements_raw = obj.get("elements")
    if not isinstance(elements_raw, list):
        raise ExtractionError(f"{class_name}: missing 'elements' list", raw_response=text)
    if "total_elements" not in obj or int(obj["total_elements"]) != len(elements_raw):
        raise ExtractionError(
            f"{class_name}: total_elements={obj.get('total_elements')!r} does not match "
            f"{len(elements_raw)} listed elements", raw_response=text)
    try:
        return [parse_element(e, class_name, require_snake_case=True)
                for e in elements_raw]
    except DatasetError as exc:
        raise ExtractionError(str(exc), raw_response=text) from exc


def _coerce_bool(value) -> bool | None:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
    return None


def annotate_elements(sketch_image, class_name: str, elements: list[Element],
                      config: ProviderConfig, sketch_id: str = "sketch",
                      transport: Callable | None = None,
                      cache: ResponseCache | None = None) -> VqaResult:
    """Query element presence for one sketch under the configured prompt style.

    Ambiguity defaults to absent: any element whose answer cannot be parsed as
    a boolean is recorded False and the result is marked repaired.
    """
    if not elements:
        raise ValueError(f"{class_name}: empty element list")
    image_b64 = _encode_image(sketch_image)
    if config.prompt_style == "per_element_yes_no":
        return _annotate_per_element(image_b64, class_name, elements, config,
                                     sketch_id, transport, cache)
    if config.prompt_style == "molmo_json":
        prompt = prompts.render_annotation_molmo(class_name, [e.name for e in elements],
                                                 sketch_id)
        expected = {e.name: e.id for e in elements}
        unwrap = sketch_id
    else:
        prompt = prompts.render_annotation_structured(class_name, [e.id for e in elements])
        expected = {e.id: e.id for e in elements}
        unwrap = None
    response = _call(_chat_payload(config, prompt, image_base64=image_b64),
                     config, transport, cache)
    text = _response_text(response)
    try:
        obj, repaired = parse_json_with_repair(text)
    except json.JSONDecodeError:
        return VqaResult(sketch_id=sketch_id,
                         presence={e.id: False for e in elements},
                         raw_response=text, parse_status="failed")
    if unwrap is not None and isinstance(obj, dict) and unwrap in obj:
        obj = obj[unwrap]
    if not isinstance(obj, dict):
        return VqaResult(sketch_id=sketch_id,
                         presence={e.id: False for e in elements},
                         raw_response=text, parse_status="failed")
    presence: dict[str, bool] = {}
    for key, elem_id in expected.items():
        value = _coerce_bool(obj.get(key))
        if value is None:
            repaired = True
            value = False
        presence[elem_id] = value
    if any(k not in expected for k in obj):
        repaired = True  # extra keys are dropped, per the prompt contract
    return VqaResult(sketch_id=sketch_id, presence=presence, raw_response=text,
                     parse_status="repaired" if repaired else "ok")


def _annotate_per_element(image_b64, class_name, elements, config, sketch_id,
                          transport, cache) -> VqaResult:
    presence: dict[str, bool] = {}
    raw_parts: list[str] = []
    repaired = False
    for element in elements:
        prompt = prompts.render_annotation_yes_no(class_name, element.name)
        response = _call(_chat_payload(config, prompt, image_base64=image_b64),
                         config, transport, cache)
        text = _response_text(response)
        raw_parts.append(f"{element.name}: {text.strip()}")
        match = _YES_NO.match(text)
        if match is None:
            repaired = True
            presence[element.id] = False
        else:
            presence[element.id] = match.group(1).lower() == "yes"
    return VqaResult(sketch_id=sketch_id, presence=presence,
                     raw_response="\n".join(raw_parts),
                     parse_status="repaired" if repaired else "ok")


def classify(sketch_image, candidate_labels: list[str], ground_truth: str,
             config: ProviderConfig, sketch_id: str = "sketch",
             label_template: str = DEFAULT_LABEL_TEMPLATE,
             transport: Callable | None = None,
             cache: ResponseCache | None = None) -> ClassifierResult:
    """Zero-shot class probabilities over the candidate set via softmax.

    The endpoint returns per-label scores, either a list aligned with the
    candidate order or a dict keyed by candidate label. The ground-truth label
    must be among the candidates and must appear in the response.
    """
    if ground_truth not in candidate_labels:
        raise ValueError(f"ground truth {ground_truth!r} not among candidates")
    payload = {"model": config.model_name,
               "image_base64": _encode_image(sketch_image),
               "labels": list(candidate_labels),
               "label_template": label_template}
    response = _call(payload, config, transport, cache)
    scores = response.get("scores")
    if isinstance(scores, list):
        if len(scores) != len(candidate_labels):
            raise ProviderError(
                f"{sketch_id}: got {len(scores)} scores for {len(candidate_labels)} labels")
        logits = [float(s) for s in scores]
    elif isinstance(scores, dict):
        missing = [lbl for lbl in candidate_labels if lbl not in scores]
        if ground_truth in missing:
            raise ProviderError(f"{sketch_id}: ground truth {ground_truth!r} missing from scores")
        if missing:
            raise ProviderError(f"{sketch_id}: scores missing labels {missing}")
        logits = [float(scores[lbl]) for lbl in candidate_labels]
    else:
        raise ProviderError(f"{sketch_id}: response carries no usable 'scores'")
    arr = np.asarray(logits, dtype=float)
    arr = arr - arr.max()
    exp = np.exp(arr)
    probs = exp / exp.sum()
    probabilities = {lbl: float(p) for lbl, p in zip(candidate_labels, probs)}
    return ClassifierResult(sketch_id=sketch_id, probabilities=probabilities,
                            ground_truth_prob=probabilities[ground_truth])


# --------------------------------------------------------------------------
# offline fixture source


@dataclass
class FixtureProvider:
    """Signals served from ground-truth annotations: E from the DB, V from
    presence counts, P from a sidecar {sketch_id: probability} map."""

    db: CommonsenseDB
    probabilities: dict[str, float]
    source_tag: str = "fixture"

    @classmethod
    def from_files(cls, db: CommonsenseDB, probs_path) -> "FixtureProvider":
        with open(probs_path, encoding="utf-8") as fh:
            probs = json.load(fh)
        if not isinstance(probs, dict):
            raise DatasetError(f"{probs_path}: probability sidecar must be a JSON object")
        return cls(db=db, probabilities={str(k): float(v) for k, v in probs.items()})

    def signals(self, record: SketchRecord) -> Signals:
        capacity = self.db.element_count(record.class_name)
        try:
            prob = self.probabilities[record.sketch_id]
        except KeyError:
            raise DatasetError(
                f"no probability entry for sketch {record.sketch_id!r}") from None
        tag = Provenance(E=self.source_tag, V=self.source_tag, P=self.source_tag)
        return Signals(E=capacity, V=float(record.visible_count), P=prob, provenance=tag)

    def iter_signals(self, records: list[SketchRecord]):
        for record in records:
            yield record, self.signals(record)
