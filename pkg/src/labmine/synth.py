"""Synthetic lab-event corpora with a known set of informative tests.

Stands in for the credentialed ICU extract. Most tests are measured sparsely
and carry no class signal; ``n_informative`` planted tests are measured for
nearly every patient, their values are shifted for patients who died, and
they are repeated more often for those patients.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .ingest import (
    KNOWN_LAB_ITEMS,
    LABEVENT_COLUMNS,
    LABITEM_COLUMNS,
    LabCatalog,
    LabEvent,
    LabItem,
    OutcomeRecord,
)

FIRST_ITEM_ID = 50001
_UNITS = ("mg/dL", "mmol/L", "K/uL", "sec", "%", "U/L", "g/dL", "")
_TEXT_RESULTS = ("TR", "NEG", "ERROR", "HEMOLYZED")
_EPOCH = datetime(2500, 1, 1)

EVENTS_FILE = "labevents.csv"
ITEMS_FILE = "labitems.csv"
OUTCOMES_FILE = "outcomes.csv"
PLANTED_FILE = "planted_items.txt"


@dataclass
class SynthCorpus:
    """Column arrays for every generated event, plus outcomes and catalog."""

    subject: np.ndarray
    item: np.ndarray
    minutes: np.ndarray      # offset from the generator epoch
    value: np.ndarray        # NaN for text results
    text: np.ndarray         # text result or "" for numeric rows
    flag: np.ndarray
    unit: np.ndarray
    died: dict[int, bool]
    catalog: LabCatalog
    planted: list[int]

    @property
    def n_events(self) -> int:
        return len(self.subject)

    def chart_time(self, i: int) -> datetime:
        return _EPOCH + timedelta(minutes=int(self.minutes[i]))

    def events(self) -> list[LabEvent]:
        out = []
        for i in range(self.n_events):
            numeric = not np.isnan(self.value[i])
            sid = int(self.subject[i])
            out.append(LabEvent(
                subject_id=sid,
                item_id=int(self.item[i]),
                chart_time=self.chart_time(i),
                hadm_id=100000 + sid,
                icustay_id=sid,
                value=_fmt_value(self.value[i]) if numeric else self.text[i],
                value_num=float(self.value[i]) if numeric else None,
                flag=self.flag[i] or None,
                value_uom=self.unit[i] or None,
            ))
        return out

    def outcomes(self) -> dict[int, OutcomeRecord]:
        return {sid: OutcomeRecord(sid, died) for sid, died in self.died.items()}

    def item_universe(self) -> list[int]:
        return sorted(self.catalog)


def _fmt_value(v: float) -> str:
    return repr(float(v))


def synth_corpus(n_patients: int = 3000, n_items: int = 700, n_informative: int = 10, seed: int = 1,
                 death_rate: float = 0.3, separation: float = 1.5, text_rate: float = 0.01) -> SynthCorpus:
    """Generate a corpus; identical arguments give identical output.

    ``separation`` is the shift, in item standard deviations, of a planted
    test's patient-level mean for patients who died.
    """
    if not 0 <= n_informative <= n_items:
        raise ValueError("n_informative must lie in [0, n_items]")
    if n_patients < 1 or n_items < 1:
        raise ValueError("need at least one patient and one item")
    rng = np.random.default_rng(seed)

    item_ids = np.arange(FIRST_ITEM_ID, FIRST_ITEM_ID + n_items)
    subjects = np.arange(1, n_patients + 1)
    died = rng.random(n_patients) < death_rate
    planted_idx = np.sort(rng.choice(n_items, size=n_informative, replace=False))
    planted_mask = np.zeros(n_items, dtype=bool)
    planted_mask[planted_idx] = True

    mu = 10 ** rng.uniform(-1, 2.5, size=n_items)
    sd = mu * rng.uniform(0.1, 0.4, size=n_items)
    p_measured = np.where(planted_mask, 0.95, rng.uniform(0.01, 0.15, size=n_items))
    repeat_rate = rng.uniform(0.3, 2.5, size=n_items)
    direction = np.where(rng.random(n_items) < 0.5, -1.0, 1.0)
    unit = rng.choice(len(_UNITS), size=n_items)

    measured = rng.random((n_patients, n_items)) < p_measured
    pat, itm = np.nonzero(measured)
    dead = died[pat]
    is_planted = planted_mask[itm]
    rate = repeat_rate[itm] + np.where(is_planted & dead, 2.0, 0.0)
    n_events = 1 + rng.poisson(rate)
    shift = np.where(is_planted & dead, separation * direction[itm] * sd[itm], 0.0)
    pair_mean = mu[itm] + shift + rng.normal(0.0, 1.0, size=len(pat)) * sd[itm]

    ev_pat = np.repeat(pat, n_events)
    ev_itm = np.repeat(itm, n_events)
    ev_val = np.repeat(pair_mean, n_events) + rng.normal(0.0, 0.3, size=len(ev_pat)) * sd[ev_itm]
    ev_val = np.round(np.abs(ev_val), 3)
    is_text = (~planted_mask[ev_itm]) & (rng.random(len(ev_pat)) < text_rate)
    text = np.where(is_text, np.array(_TEXT_RESULTS)[rng.integers(0, len(_TEXT_RESULTS), len(ev_pat))], "")
    ev_val = np.where(is_text, np.nan, ev_val)
    flag = np.where(~is_text & (ev_val > mu[ev_itm] + 2 * sd[ev_itm]), "abnormal", "")

    admit = rng.integers(0, 400 * 365 * 24 * 60, size=n_patients)
    minutes = admit[ev_pat] + rng.integers(0, 10 * 24 * 60, size=len(ev_pat))
    order = np.lexsort((ev_itm, minutes, ev_pat))

    catalog = LabCatalog(_catalog_entry(int(i), rng) for i in item_ids)
    return SynthCorpus(
        subject=subjects[ev_pat][order],
        item=item_ids[ev_itm][order],
        minutes=minutes[order],
        value=ev_val[order],
        text=text[order],
        flag=flag[order],
        unit=np.array(_UNITS)[unit][ev_itm][order],
        died={int(s): bool(d) for s, d in zip(subjects, died)},
        catalog=catalog,
        planted=[int(i) for i in item_ids[planted_idx]],
    )


def _catalog_entry(item_id: int, rng: np.random.Generator) -> LabItem:
    fluid = ("BLOOD", "URINE", "OTHER BODY FLUID")[int(rng.integers(0, 3))]
    category = ("CHEMISTRY", "HEMATOLOGY", "BLOOD GAS")[int(rng.integers(0, 3))]
    return KNOWN_LAB_ITEMS.get(item_id) or LabItem(item_id, f"TEST {item_id}", fluid, category)


def _chart_text(minutes: int) -> str:
    t = _EPOCH + timedelta(minutes=int(minutes))
    return f"{t.month}/{t.day}/{t.year} {t.hour:02d}:{t.minute:02d}"


def write_corpus(corpus: SynthCorpus, out_dir: str | os.PathLike) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in (EVENTS_FILE, ITEMS_FILE, OUTCOMES_FILE, PLANTED_FILE)}

    with open(paths[EVENTS_FILE], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEVENT_COLUMNS)
        for i in range(corpus.n_events):
            sid = int(corpus.subject[i])
            v = corpus.value[i]
            numeric = not np.isnan(v)
            w.writerow([
                sid, 100000 + sid, sid, int(corpus.item[i]), _chart_text(corpus.minutes[i]),
                _fmt_value(v) if numeric else corpus.text[i],
                _fmt_value(v) if numeric else "",
                corpus.flag[i], corpus.unit[i],
            ])

    with open(paths[ITEMS_FILE], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABITEM_COLUMNS)
        for item_id in sorted(corpus.catalog):
            it = corpus.catalog[item_id]
            w.writerow([it.item_id, it.test_name, it.fluid, it.category, it.loinc_code or "",
                        it.loinc_description or ""])

    with open(paths[OUTCOMES_FILE], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["SUBJECT_ID", "DIED"])
        for sid in sorted(corpus.died):
            w.writerow([sid, int(corpus.died[sid])])

    paths[PLANTED_FILE].write_text("".join(f"{i}\n" for i in corpus.planted), encoding="utf-8")
    return paths
