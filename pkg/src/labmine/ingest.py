"""Parsing of lab-event, lab-item and outcome files, and per-patient aggregation.

Lab events are aggregated into one row per patient (``subject_id``) in one of
two encodings: ``avg`` (mean numeric result per test) or ``count`` (number of
times each test was performed). Tests a patient never had are encoded as 0.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from fractions import Fraction
from typing import IO, Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .dataset import FeatureTable

log = logging.getLogger(__name__)

LABEVENT_COLUMNS = (
    "SUBJECT_ID", "HADM_ID", "ICUSTAY_ID", "ITEMID", "CHARTTIME",
    "VALUE", "VALUENUM", "FLAG", "VALUEUOM",
)
LABITEM_COLUMNS = (
    "ITEMID", "TEST_NAME", "FLUID", "CATEGORY", "LOINC_CODE", "LOINC_DESCRIPTION",
)
OUTCOME_COLUMNS = ("SUBJECT_ID", "DIED")


class ParseError(ValueError):
    """Unrecoverable problem with an input file (bad header, duplicate key...)."""


class AggregationMode(str, Enum):
    AVG = "avg"
    COUNT = "count"

    @classmethod
    def parse(cls, value: "str | AggregationMode") -> "AggregationMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown aggregation mode {value!r} (expected avg or count)") from None


@dataclass(frozen=True, slots=True)
class LabEvent:
    subject_id: int
    item_id: int
    chart_time: datetime
    hadm_id: int | None = None
    icustay_id: int | None = None
    value: str | None = None
    value_num: float | None = None
    flag: str | None = None
    value_uom: str | None = None


@dataclass(frozen=True, slots=True)
class LabItem:
    item_id: int
    test_name: str
    fluid: str
    category: str
    loinc_code: str | None = None
    loinc_description: str | None = None


@dataclass(frozen=True, slots=True)
class OutcomeRecord:
    subject_id: int
    died: bool

    @property
    def label(self) -> int:
        return int(self.died)


class ParsedEvents(NamedTuple):
    events: list[LabEvent]
    skipped: int


class BuiltTable(NamedTuple):
    table: FeatureTable
    skipped_events: int


class LabCatalog(Mapping[int, LabItem]):
    """Read-only ``item_id -> LabItem`` lookup."""

    def __init__(self, items: Iterable[LabItem] = ()):
        self._items: dict[int, LabItem] = {}
        for item in items:
            if item.item_id in self._items:
                raise ParseError(f"duplicate ITEMID {item.item_id} in lab-item catalog")
            self._items[item.item_id] = item

    def __getitem__(self, item_id: int) -> LabItem:
        try:
            return self._items[item_id]
        except KeyError:
            raise KeyError(f"unknown item {item_id}") from None

    def __iter__(self) -> Iterator[int]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)


# ---------------------------------------------------------------------------
# field parsing

def _text_stream(stream: IO) -> IO[str]:
    if isinstance(stream, io.TextIOBase):
        return stream
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def _rows(stream: IO) -> Iterator[list[str]]:
    """CSV rows, skipping blank lines and ``#`` provenance comments."""
    for row in csv.reader(_text_stream(stream)):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if row[0].startswith("#"):
            continue
        yield row


def _header_index(header: Sequence[str], required: Sequence[str], what: str) -> dict[str, int]:
    names = [h.strip().upper() for h in header]
    index = {}
    for col in required:
        if col not in names:
            raise ParseError(f"{what}: missing column {col}")
        index[col] = names.index(col)
    return index


def _opt(text: str) -> str | None:
    text = text.strip()
    return text or None


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise ValueError(f"non-positive key {value}")
    return value


def _opt_positive_int(text: str) -> int | None:
    text = text.strip()
    return _positive_int(text) if text else None


def _opt_finite(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite VALUENUM {text!r}")
    return value


def parse_chart_time(text: str) -> datetime:
    """Parse ``M/D/YYYY HH:MM[:SS]`` or ISO-8601.

    Shifted MIMIC dates routinely land in the 2100-3400 range, which
    ``datetime`` handles up to year 9999.
    """
    text = text.strip()
    if "/" in text:
        date_part, _, time_part = text.partition(" ")
        month, day, year = (int(p) for p in date_part.split("/"))
        hms = [int(p) for p in time_part.split(":")] if time_part else [0, 0]
        if len(hms) == 2:
            hms.append(0)
        if len(hms) != 3:
            raise ValueError(f"bad time {time_part!r}")
        return datetime(year, month, day, *hms)
    return datetime.fromisoformat(text)


# ---------------------------------------------------------------------------
# readers

def parse_labevents(stream: IO) -> ParsedEvents:
    """Parse a LABEVENTS file.

    Every well-formed row becomes a :class:`LabEvent`; row order is kept.
    Rows with a malformed field are skipped and counted. A missing header or
    mandatory column raises :class:`ParseError`.
    """
    rows = _rows(stream)
    header = next(rows, None)
    if header is None:
        raise ParseError("labevents: missing header row")
    ix = _header_index(header, LABEVENT_COLUMNS, "labevents")
    width = max(ix.values()) + 1

    events: list[LabEvent] = []
    skipped = 0
    for lineno, row in enumerate(rows, start=2):
        if len(row) < width:
            skipped += 1
            continue
        try:
            event = LabEvent(
                subject_id=_positive_int(row[ix["SUBJECT_ID"]]),
                item_id=_positive_int(row[ix["ITEMID"]]),
                chart_time=parse_chart_time(row[ix["CHARTTIME"]]),
                hadm_id=_opt_positive_int(row[ix["HADM_ID"]]),
                icustay_id=_opt_positive_int(row[ix["ICUSTAY_ID"]]),
                value=_opt(row[ix["VALUE"]]),
                value_num=_opt_finite(row[ix["VALUENUM"]]),
                flag=_opt(row[ix["FLAG"]]),
                value_uom=_opt(row[ix["VALUEUOM"]]),
            )
        except ValueError as exc:
            log.debug("labevents row %d skipped: %s", lineno, exc)
            skipped += 1
            continue
        events.append(event)
    if skipped:
        log.warning("labevents: skipped %d malformed rows", skipped)
    return ParsedEvents(events, skipped)


def parse_labitems(stream: IO) -> LabCatalog:
    rows = _rows(stream)
    header = next(rows, None)
    if header is None:
        raise ParseError("labitems: missing header row")
    ix = _header_index(header, LABITEM_COLUMNS, "labitems")
    items = []
    for lineno, row in enumerate(rows, start=2):
        try:
            items.append(LabItem(
                item_id=_positive_int(row[ix["ITEMID"]]),
                test_name=row[ix["TEST_NAME"]].strip(),
                fluid=row[ix["FLUID"]].strip(),
                category=row[ix["CATEGORY"]].strip(),
                loinc_code=_opt(row[ix["LOINC_CODE"]]),
                loinc_description=_opt(row[ix["LOINC_DESCRIPTION"]]),
            ))
        except (ValueError, IndexError) as exc:
            raise ParseError(f"labitems line {lineno}: {exc}") from None
    return LabCatalog(items)


def load_outcomes(stream: IO) -> dict[int, OutcomeRecord]:
    rows = _rows(stream)
    header = next(rows, None)
    if header is None:
        raise ParseError("outcomes: missing header row")
    ix = _header_index(header, OUTCOME_COLUMNS, "outcomes")
    outcomes: dict[int, OutcomeRecord] = {}
    for lineno, row in enumerate(rows, start=2):
        try:
            sid = _positive_int(row[ix["SUBJECT_ID"]])
            died = row[ix["DIED"]].strip()
        except (ValueError, IndexError) as exc:
            raise ParseError(f"outcomes line {lineno}: {exc}") from None
        if died not in ("0", "1"):
            raise ParseError(f"outcomes line {lineno}: DIED must be 0 or 1, got {died!r}")
        if sid in outcomes:
            raise ParseError(f"outcomes line {lineno}: duplicate SUBJECT_ID {sid}")
        outcomes[sid] = OutcomeRecord(sid, died == "1")
    return outcomes


# ---------------------------------------------------------------------------
# aggregation

class ExactSum:
    """Running float sum whose final value does not depend on addition order.

    Keeps Shewchuk's non-overlapping partials; :meth:`value` is the correctly
    rounded total, so batch and incremental aggregation agree bit for bit.
    """

    __slots__ = ("_partials",)

    def __init__(self) -> None:
        self._partials: list[float] = []

    def add(self, x: float) -> None:
        partials = self._partials
        i = 0
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                partials[i] = lo
                i += 1
            x = hi
        partials[i:] = [x]

    def value(self) -> float:
        return math.fsum(self._partials)

    def mean(self, n: int) -> float:
        """Correctly rounded ``total / n``.

        Dividing the rounded total would round twice and can land one ulp
        outside the range of the values averaged.
        """
        exact = sum(map(Fraction, self._partials), Fraction(0))
        return float(exact / n)

    def copy(self) -> "ExactSum":
        other = ExactSum()
        other._partials = list(self._partials)
        return other


class ItemAggregate:
    """Running aggregate for one (patient, lab item) pair."""

    __slots__ = ("total", "n_numeric", "n_total")

    def __init__(self) -> None:
        self.total = ExactSum()
        self.n_numeric = 0
        self.n_total = 0

    def add(self, value_num: float | None) -> None:
        self.n_total += 1
        if value_num is not None:
            self.total.add(value_num)
            self.n_numeric += 1

    def feature(self, mode: AggregationMode) -> float:
        if mode is AggregationMode.COUNT:
            return float(self.n_total)
        if self.n_numeric == 0:
            return 0.0
        return self.total.mean(self.n_numeric)

    def copy(self) -> "ItemAggregate":
        other = ItemAggregate()
        other.total = self.total.copy()
        other.n_numeric = self.n_numeric
        other.n_total = self.n_total
        return other


def default_item_universe(events: Iterable[LabEvent], catalog: Mapping[int, LabItem] | None = None) -> list[int]:
    """All catalog item ids ascending, or the ids seen in ``events`` if no catalog."""
    if catalog:
        return sorted(catalog)
    return sorted({e.item_id for e in events})


def attribute_name(item_id: int) -> str:
    return str(item_id)


def build_feature_table(
    events: Iterable[LabEvent],
    outcomes: Mapping[int, OutcomeRecord],
    mode: AggregationMode | str,
    item_universe: Sequence[int],
) -> BuiltTable:
    """Aggregate lab events into one row per patient in ``outcomes``.

    Rows are ordered by ascending ``subject_id`` and columns follow
    ``item_universe``. Events for items outside the universe are skipped and
    counted; events for patients without an outcome are an error.
    """
    mode = AggregationMode.parse(mode)
    universe = list(item_universe)
    if not universe:
        raise ValueError("item_universe must be non-empty")
    if len(set(universe)) != len(universe):
        raise ValueError("item_universe contains duplicates")
    column = {item: j for j, item in enumerate(universe)}

    aggregates: dict[tuple[int, int], ItemAggregate] = {}
    unknown_subjects: set[int] = set()
    skipped = 0
    for e in events:
        if e.subject_id not in outcomes:
            unknown_subjects.add(e.subject_id)
            continue
        if e.item_id not in column:
            skipped += 1
            continue
        key = (e.subject_id, e.item_id)
        agg = aggregates.get(key)
        if agg is None:
            agg = aggregates[key] = ItemAggregate()
        agg.add(e.value_num)
    if unknown_subjects:
        ids = ", ".join(map(str, sorted(unknown_subjects)[:20]))
        more = "" if len(unknown_subjects) <= 20 else f" (+{len(unknown_subjects) - 20} more)"
        raise ValueError(f"events reference subjects without an outcome: {ids}{more}")
    if skipped:
        log.info("build_feature_table: skipped %d events outside the item universe", skipped)

    subjects = sorted(outcomes)
    row_of = {sid: i for i, sid in enumerate(subjects)}
    X = np.zeros((len(subjects), len(universe)), dtype=np.float64)
    for (sid, item), agg in aggregates.items():
        X[row_of[sid], column[item]] = agg.feature(mode)
    y = np.array([outcomes[sid].label for sid in subjects], dtype=np.int8)
    table = FeatureTable(
        attribute_names=[attribute_name(i) for i in universe],
        keys=np.array(subjects, dtype=np.int64),
        X=X,
        y=y,
        mode=mode.value,
    )
    return BuiltTable(table, skipped)


# Static descriptions for lab items that recur among top-ranked tests.
KNOWN_LAB_ITEMS = {
    50177: LabItem(50177, "UREA N", "BLOOD", "CHEMISTRY", "3094-0", "Urea nitrogen [mass/volume] in serum or plasma"),
    50090: LabItem(50090, "CREAT", "BLOOD", "CHEMISTRY", "2160-0", "Creatinine [mass/volume] in serum or plasma"),
    50399: LabItem(50399, "INR(PT)", "BLOOD", "HEMATOLOGY", "34714-6", "INR in blood by coagulation assay"),
    50440: LabItem(50440, "PTT", "BLOOD", "HEMATOLOGY", "3173-2",
                   "Activated partial thromboplastin time (aPTT) in blood by coagulation assay"),
    50439: LabItem(50439, "PT", "BLOOD", "HEMATOLOGY", "5964-2", "Prothrombin time (PT) in blood by coagulation assay"),
    50112: LabItem(50112, "GLUCOSE", "BLOOD", "CHEMISTRY", "2345-7", "Glucose [mass/volume] in serum or plasma"),
}
