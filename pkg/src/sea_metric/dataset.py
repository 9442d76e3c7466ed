"""Commonsense element database, sketch annotations, and element statistics.

File formats:
  * element DB: JSON array of {"class", "total_elements", "elements":
    [{"id", "name", "optional", ...extras}]}; ids are "<class>.<name>",
    names snake_case by convention (preserved verbatim here, only trimmed).
  * categories sidecar: JSON object {class -> category}.
  * annotations: JSONL, one sketch per line:
    {"sketch_id", "class", "caption", "presence": {element_id: bool}}.

The lift statistic treats element presence as a binary class-level attribute:
lift(e, c) = (n(e,c)/n(c)) / (n(e)/N) with n(e,c) the number of classes in
category c containing element e (matched by element name), n(c) the class
count of the category, n(e) the global class count of e, N the total classes.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field

__all__ = [
    "DatasetError",
    "Element",
    "CommonsenseDB",
    "SketchRecord",
    "LiftRow",
    "load_db",
    "save_db",
    "load_categories",
    "load_annotations",
    "compute_lift",
    "global_frequency",
    "validate_caption",
    "lift_to_csv",
    "frequency_to_csv",
]

_SNAKE_CASE = re.compile(r"^[a-z0-9]+(?:_[a-z0-9]+)*$")


class DatasetError(ValueError):
    """Schema or consistency violation in a database or annotation file."""


@dataclass(frozen=True)
class Element:
    """One commonsense element; extras (e.g. importance_score) are preserved
    through round-trips but unused by the metric."""

    id: str
    name: str
    optional: bool = False
    extra: tuple[tuple[str, object], ...] = ()

    def to_dict(self) -> dict:
        out = {"id": self.id, "name": self.name, "optional": self.optional}
        out.update(dict(self.extra))
        return out


@dataclass
class CommonsenseDB:
    """Per-class ordered element lists plus an optional class -> category map."""

    classes: dict[str, list[Element]] = field(default_factory=dict)
    category_of: dict[str, str] = field(default_factory=dict)

    def element_count(self, class_name: str) -> int:
        try:
            return len(self.classes[class_name])
        except KeyError:
            raise DatasetError(f"unknown class {class_name!r}") from None

    def element_ids(self, class_name: str) -> set[str]:
        return {e.id for e in self.classes[class_name]}

    @property
    def n_classes(self) -> int:
        return len(self.classes)


def parse_element(obj: dict, class_name: str, require_snake_case: bool = False) -> Element:
    """Validate one element object against its class."""
    if not isinstance(obj, dict):
        raise DatasetError(f"class {class_name!r}: element entry is not an object: {obj!r}")
    try:
        raw_id = obj["id"]
        raw_name = obj["name"]
    except KeyError as missing:
        raise DatasetError(f"class {class_name!r}: element missing key {missing}") from None
    elem_id = str(raw_id).strip()
    name = str(raw_name).strip()
    if require_snake_case and not _SNAKE_CASE.match(name):
        raise DatasetError(f"class {class_name!r}: element name {name!r} is not snake_case")
    if elem_id != f"{class_name}.{name}":
        raise DatasetError(
            f"class {class_name!r}: element id {elem_id!r} must equal '{class_name}.{name}'")
    extra = tuple(sorted((k, v) for k, v in obj.items()
                         if k not in ("id", "name", "optional")))
    return Element(id=elem_id, name=name, optional=bool(obj.get("optional", False)),
                   extra=extra)


def _parse_class_entry(obj: dict) -> tuple[str, list[Element]]:
    if not isinstance(obj, dict) or "class" not in obj:
        raise DatasetError(f"entry without a 'class' key: {obj!r}")
    class_name = str(obj["class"]).strip()
    elements_raw = obj.get("elements")
    if not isinstance(elements_raw, list):
        raise DatasetError(f"class {class_name!r}: 'elements' must be a list")
    elements = [parse_element(e, class_name) for e in elements_raw]
    if "total_elements" in obj and int(obj["total_elements"]) != len(elements):
        raise DatasetError(
            f"class {class_name!r}: total_elements={obj['total_elements']} "
            f"but {len(elements)} elements listed")
    seen: set[str] = set()
    for e in elements:
        if e.name in seen:
            raise DatasetError(f"class {class_name!r}: duplicate element name {e.name!r}")
        seen.add(e.name)
    return class_name, elements


def load_db(path, categories_path=None) -> CommonsenseDB:
    """Load and validate an element DB, optionally with its category sidecar."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: not valid JSON: {exc}") from exc
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list):
        raise DatasetError(f"{path}: expected a JSON array of class entries")
    db = CommonsenseDB()
    for obj in data:
        class_name, elements = _parse_class_entry(obj)
        if class_name in db.classes:
            raise DatasetError(f"{path}: duplicate class {class_name!r}")
        db.classes[class_name] = elements
    if categories_path is not None:
        db.category_of = load_categories(categories_path, db)
    return db


def load_categories(path, db: CommonsenseDB | None = None) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        mapping = json.load(fh)
    if not isinstance(mapping, dict):
        raise DatasetError(f"{path}: categories file must be a JSON object")
    categories = {str(k): str(v) for k, v in mapping.items()}
    if db is not None:
        unknown = sorted(set(categories) - set(db.classes))
        if unknown:
            raise DatasetError(f"{path}: categories for unknown classes: {unknown}")
    return categories


def save_db(db: CommonsenseDB, path, categories_path=None) -> None:
    """Serialize in the same shape load_db reads (round-trip stable)."""
    payload = [{"class": name, "total_elements": len(elements),
                "elements": [e.to_dict() for e in elements]}
               for name, elements in db.classes.items()]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    if categories_path is not None:
        with open(categories_path, "w", encoding="utf-8") as fh:
            json.dump(db.category_of, fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class SketchRecord:
    """One sketch's identity plus per-element presence booleans."""

    sketch_id: str
    class_name: str
    caption: str | None
    presence: dict[str, bool]

    @property
    def visible_count(self) -> int:
        return sum(1 for present in self.presence.values() if present)


def load_annotations(path, db: CommonsenseDB) -> list[SketchRecord]:
    """Read JSONL annotations, validating every element id against the DB."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            try:
                sketch_id = str(obj["sketch_id"])
                class_name = str(obj["class"])
                presence_raw = obj["presence"]
            except (KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: missing field: {exc}") from exc
            if class_name not in db.classes:
                raise DatasetError(f"{path}:{lineno}: unknown class {class_name!r}")
            valid_ids = db.element_ids(class_name)
            presence: dict[str, bool] = {}
            for elem_id, value in presence_raw.items():
                if elem_id not in valid_ids:
                    raise DatasetError(
                        f"{path}:{lineno}: element id {elem_id!r} not in class {class_name!r}")
                presence[elem_id] = bool(value)
            records.append(SketchRecord(sketch_id=sketch_id, class_name=class_name,
                                        caption=obj.get("caption"), presence=presence))
    return records


@dataclass(frozen=True)
class LiftRow:
    element: str
    category: str
    n_e_c: int
    n_c: int
    n_e: int
    N: int
    p_cat: float
    lift: float


def _element_class_sets(db: CommonsenseDB) -> dict[str, set[str]]:
    by_element: dict[str, set[str]] = {}
    for class_name, elements in db.classes.items():
        for e in elements:
            by_element.setdefault(e.name, set()).add(class_name)
    return by_element


def compute_lift(db: CommonsenseDB, min_support: int = 3) -> list[LiftRow]:
    """Per-category element enrichment, sorted within category by descending
    lift, then descending in-category count, then element name.

    Rows with fewer than min_support supporting classes are dropped.
    """
    if not db.category_of:
        raise DatasetError("lift requires a class -> category map")
    n_total = db.n_classes
    class_count_by_cat: dict[str, int] = {}
    for class_name in db.classes:
        cat = db.category_of.get(class_name)
        if cat is None:
            raise DatasetError(f"class {class_name!r} has no category")
        class_count_by_cat[cat] = class_count_by_cat.get(cat, 0) + 1
    by_element = _element_class_sets(db)
    rows: list[LiftRow] = []
    for element, classes in by_element.items():
        n_e = len(classes)
        per_cat: dict[str, int] = {}
        for class_name in classes:
            cat = db.category_of[class_name]
            per_cat[cat] = per_cat.get(cat, 0) + 1
        for cat, n_e_c in per_cat.items():
            if n_e_c < min_support:
                continue
            n_c = class_count_by_cat[cat]
            p_cat = n_e_c / n_c
            lift = p_cat / (n_e / n_total)
            rows.append(LiftRow(element=element, category=cat, n_e_c=n_e_c,
                                n_c=n_c, n_e=n_e, N=n_total, p_cat=p_cat, lift=lift))
    rows.sort(key=lambda r: (r.category, -r.lift, -r.n_e_c, r.element))
    return rows


def global_frequency(db: CommonsenseDB) -> list[tuple[str, int]]:
    """Elements ranked by how many classes contain them (desc, then name)."""
    by_element = _element_class_sets(db)
    ranked = [(name, len(classes)) for name, classes in by_element.items()]
    ranked.sort(key=lambda item: (-item[1], item[0]))
    return ranked


def validate_caption(caption: str, class_name: str) -> bool:
    """True iff the class label occurs in the caption at token boundaries.

    Underscores in the label map to spaces and matching is case-insensitive;
    boundaries prevent 'cat' from matching 'catapult'.
    """
    label = class_name.replace("_", " ").strip()
    if not label:
        return False
    pattern = r"(?<![A-Za-z0-9])" + re.escape(label) + r"(?![A-Za-z0-9])"
    return re.search(pattern, caption, flags=re.IGNORECASE) is not None


def lift_to_csv(rows: list[LiftRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["element", "category", "n_e_c", "n_c", "n_e", "N", "p_cat", "lift"])
    for r in rows:
        writer.writerow([r.element, r.category, r.n_e_c, r.n_c, r.n_e, r.N,
                         repr(r.p_cat), repr(r.lift)])
    return buf.getvalue()


def frequency_to_csv(ranked: list[tuple[str, int]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["element", "n_classes"])
    for name, count in ranked:
        writer.writerow([name, count])
    return buf.getvalue()
