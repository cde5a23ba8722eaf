"""Incremental per-patient scoring of incoming lab events.

A :class:`PatientState` keeps the same running aggregates the batch table
builder uses, so the feature row after any prefix of events is bit-identical
to the batch row over those events, whatever their order.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .classifiers.models import Model, SchemaMismatch
from .ingest import AggregationMode, ItemAggregate, LabEvent

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5


@dataclass
class PatientState:
    subject_id: int
    mode: AggregationMode
    item_universe: tuple[int, ...]
    aggregates: dict[int, ItemAggregate] = field(default_factory=dict)
    last_update: datetime | None = None

    def __post_init__(self):
        self.mode = AggregationMode.parse(self.mode)
        self.item_universe = tuple(self.item_universe)
        self._column = {item: j for j, item in enumerate(self.item_universe)}
        self._row = np.zeros(len(self.item_universe))
        self._checked_for: Model | None = None
        for item, agg in self.aggregates.items():
            self._row[self._column[item]] = agg.feature(self.mode)

    def feature_row(self) -> np.ndarray:
        return self._row.copy()

    def counts(self, item_id: int) -> tuple[int, int]:
        """(numeric count, total count) for one item."""
        agg = self.aggregates.get(item_id)
        return (agg.n_numeric, agg.n_total) if agg else (0, 0)


def new_state(subject_id: int, model_or_universe: Model | Sequence[int], mode: str | None = None) -> PatientState:
    if isinstance(model_or_universe, Model):
        model = model_or_universe
        universe = [int(n) for n in model.attribute_names]
        mode = mode or model.mode
    else:
        universe = list(model_or_universe)
    if mode is None:
        raise ValueError("aggregation mode required")
    return PatientState(subject_id, AggregationMode.parse(mode), tuple(universe))


def ingest_event(state: PatientState, e: LabEvent) -> PatientState:
    """Fold one event into ``state`` (updated in place and returned).

    Events for items outside the model's universe only refresh
    ``last_update``, mirroring the batch builder which skips them.
    """
    if e.subject_id != state.subject_id:
        raise ValueError(f"event for subject {e.subject_id} applied to state of {state.subject_id}")
    if e.item_id in state._column:
        agg = state.aggregates.get(e.item_id)
        if agg is None:
            agg = state.aggregates[e.item_id] = ItemAggregate()
        agg.add(e.value_num)
        state._row[state._column[e.item_id]] = agg.feature(state.mode)
    if state.last_update is None or e.chart_time > state.last_update:
        state.last_update = e.chart_time
    return state


def score(model: Model, state: PatientState) -> float:
    """Probability of the death class for the patient's current feature row."""
    if state._checked_for is not model:
        if model.mode and AggregationMode.parse(model.mode) is not state.mode:
            raise SchemaMismatch(f"model expects {model.mode} features, state aggregates {state.mode.value}")
        if tuple(int(n) for n in model.attribute_names) != state.item_universe:
            raise SchemaMismatch("state item universe differs from the model schema")
        state._checked_for = model
    return float(model.predict_proba(state._row)[1])


@dataclass(frozen=True)
class WarningEvent:
    subject_id: int
    chart_time: datetime | None
    probability: float
    threshold: float


def check_threshold(probability: float, threshold: float, state: PatientState) -> WarningEvent | None:
    if not (0.0 <= probability <= 1.0 and 0.0 <= threshold <= 1.0):
        raise ValueError("probability and threshold must lie in [0, 1]")
    if probability >= threshold:
        return WarningEvent(state.subject_id, state.last_update, probability, threshold)
    return None


class Monitor:
    """Replays lab events against a trained model and raises warnings.

    With ``suppress=True`` (default) a patient gets one warning per episode:
    after warning, no new warning fires until the score falls back below the
    threshold.
    """

    def __init__(self, model: Model, threshold: float = DEFAULT_THRESHOLD, suppress: bool = True):
        if not 0.0 <= threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if model.mode is None:
            raise ValueError("model carries no aggregation mode")
        self.model = model
        self.threshold = threshold
        self.suppress = suppress
        self.states: dict[int, PatientState] = {}
        self.latest: dict[int, float] = {}
        self._armed: dict[int, bool] = {}

    def state(self, subject_id: int) -> PatientState:
        st = self.states.get(subject_id)
        if st is None:
            st = self.states[subject_id] = new_state(subject_id, self.model)
        return st

    def process(self, event: LabEvent) -> WarningEvent | None:
        st = ingest_event(self.state(event.subject_id), event)
        p = score(self.model, st)
        self.latest[event.subject_id] = p
        warning = check_threshold(p, self.threshold, st)
        if not self.suppress:
            return warning
        armed = self._armed.get(event.subject_id, True)
        if warning is None:
            self._armed[event.subject_id] = True
            return None
        self._armed[event.subject_id] = False
        return warning if armed else None

    def replay(self, events: Iterable[LabEvent]) -> Iterator[WarningEvent]:
        for e in events:
            w = self.process(e)
            if w is not None:
                yield w


def write_warnings(warnings: Iterable[WarningEvent], stream: IO[str], comments: Sequence[str] = ()) -> int:
    for c in comments:
        stream.write(f"# {c}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["subject_id", "chart_time", "probability", "threshold"])
    n = 0
    for warning in warnings:
        ts = warning.chart_time.isoformat(sep=" ") if warning.chart_time else ""
        w.writerow([warning.subject_id, ts, repr(warning.probability), repr(warning.threshold)])
        n += 1
    return n


def write_summary(monitor: Monitor, stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["subject_id", "n_events", "last_update", "p_dead", "above_threshold"])
    for sid in sorted(monitor.states):
        st = monitor.states[sid]
        n_events = sum(a.n_total for a in st.aggregates.values())
        p = monitor.latest.get(sid, 0.0)
        ts = st.last_update.isoformat(sep=" ") if st.last_update else ""
        w.writerow([sid, n_events, ts, repr(p), int(p >= monitor.threshold)])
