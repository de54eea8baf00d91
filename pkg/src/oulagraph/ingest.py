"""Loading and cleaning of the OULAD student, assessment and submission files."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from .grades import KEY, PASS_THRESHOLD, PassWeightModel, grade_inputs

logger = logging.getLogger(__name__)

FINAL_RESULTS = ("Pass", "Distinction", "Fail", "Withdrawn")
ASSESSMENT_TYPES = ("TMA", "CMA", "Exam")
MISSING = {"", "?", "NA", "nan", "NaN"}

# Days of the presentation on or before which a withdrawal removes the record.
EARLY_WITHDRAWAL_DAY = 7

STUDENT_INFO = "studentInfo.csv"
ASSESSMENTS = "assessments.csv"
STUDENT_ASSESSMENT = "studentAssessment.csv"
STUDENT_REGISTRATION = "studentRegistration.csv"

CANONICAL_COLUMNS = [
    "registration_id", "id_student", "code_module", "code_presentation", "gender", "region",
    "highest_education", "imd_band", "age_band", "num_of_prev_attempts", "studied_credits",
    "disability", "final_result", "course_category", "withdrawal_day", "label",
]


class MalformedRow(ValueError):
    pass


def _missing(s: str) -> bool:
    return s.strip() in MISSING


def _int(s: str):
    if _missing(s):
        return None
    return int(float(s))


def _req_int(s: str) -> int:
    v = _int(s)
    if v is None:
        raise MalformedRow("missing required integer")
    return v


def _pos_int(s: str) -> int:
    v = _req_int(s)
    if v <= 0:
        raise MalformedRow(f"expected positive integer, got {v}")
    return v


def _nonneg_int(s: str) -> int:
    v = _req_int(s)
    if v < 0:
        raise MalformedRow(f"expected non-negative integer, got {v}")
    return v


def _float(s: str):
    return None if _missing(s) else float(s)


def _score(s: str):
    v = _float(s)
    if v is not None and not 0.0 <= v <= 100.0:
        raise MalformedRow(f"score {v} outside [0, 100]")
    return v


def _weight(s: str) -> float:
    v = _float(s)
    if v is None or not 0.0 <= v <= 100.0:
        raise MalformedRow(f"weight {s!r} outside [0, 100]")
    return v


def _cat(s: str):
    return None if _missing(s) else s.strip()


def _req_cat(s: str) -> str:
    v = _cat(s)
    if v is None:
        raise MalformedRow("missing required value")
    return v


def _one_of(values: tuple[str, ...]) -> Callable[[str], str]:
    def conv(s: str) -> str:
        v = _req_cat(s)
        if v not in values:
            raise MalformedRow(f"{v!r} not in {values}")
        return v
    return conv


STUDENT_INFO_SCHEMA: dict[str, Callable] = {
    "code_module": _req_cat,
    "code_presentation": _req_cat,
    "id_student": _pos_int,
    "gender": _req_cat,
    "region": _req_cat,
    "highest_education": _req_cat,
    "imd_band": _cat,
    "age_band": _req_cat,
    "num_of_prev_attempts": _nonneg_int,
    "studied_credits": _pos_int,
    "disability": _req_cat,
    "final_result": _one_of(FINAL_RESULTS),
}

ASSESSMENT_SCHEMA: dict[str, Callable] = {
    "code_module": _req_cat,
    "code_presentation": _req_cat,
    "id_assessment": _req_int,
    "assessment_type": _one_of(ASSESSMENT_TYPES),
    "date": _int,
    "weight": _weight,
}

SUBMISSION_SCHEMA: dict[str, Callable] = {
    "id_assessment": _req_int,
    "id_student": _pos_int,
    "date_submitted": _int,
    "is_banked": _int,
    "score": _score,
}

REGISTRATION_SCHEMA: dict[str, Callable] = {
    "code_module": _req_cat,
    "code_presentation": _req_cat,
    "id_student": _pos_int,
    "date_registration": _int,
    "date_unregistration": _int,
}

INT_COLUMNS = {"id_student", "id_assessment", "num_of_prev_attempts", "studied_credits"}
NULLABLE_INT_COLUMNS = {"due_day", "date_submitted", "is_banked", "date_registration", "date_unregistration",
                        "withdrawal_day"}


@dataclass
class Rejection:
    file: str
    line: int
    reason: str


def read_table(path: str | Path, schema: dict[str, Callable], optional: tuple[str, ...] = ()) -> tuple[pd.DataFrame, list[Rejection]]:
    """Parse a CSV against ``schema`` row by row.

    Rows with the wrong field count or an unconvertible cell are rejected and
    logged with their 1-based line number (the header is line 1).  Columns in
    ``optional`` may be absent from the header and are then filled as missing.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"required OULAD file missing: {path}")
    rows: dict[str, list] = {c: [] for c in schema}
    rejected: list[Rejection] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip().strip('"') for h in next(reader, [])]
        absent = [c for c in schema if c not in header]
        missing_required = [c for c in absent if c not in optional]
        if missing_required:
            raise ValueError(f"{path.name}: missing columns {missing_required}")
        pos = {c: header.index(c) for c in schema if c in header}
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            try:
                if len(fields) != len(header):
                    raise MalformedRow(f"expected {len(header)} fields, got {len(fields)}")
                parsed = {c: conv(fields[pos[c]]) if c in pos else None for c, conv in schema.items()}
            except (MalformedRow, ValueError) as exc:
                rejected.append(Rejection(path.name, lineno, str(exc)))
                logger.warning("%s line %d rejected: %s", path.name, lineno, exc)
                continue
            for c, v in parsed.items():
                rows[c].append(v)
    df = pd.DataFrame(rows)
    for c in df.columns:
        if c in INT_COLUMNS:
            df[c] = df[c].astype("int64")
        elif c in NULLABLE_INT_COLUMNS or c == "date":
            df[c] = df[c].astype("Int64")
        elif c in {"score", "weight"}:
            df[c] = df[c].astype(float)
    return df, rejected


@dataclass
class OulaTables:
    student_info: pd.DataFrame
    assessments: pd.DataFrame
    submissions: pd.DataFrame
    registrations: pd.DataFrame | None = None
    rejections: list[Rejection] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __iter__(self):
        # unpacks as (rows, defs, subs)
        return iter((self.student_info, self.assessments, self.submissions))


def check_assessment_weights(defs: pd.DataFrame) -> list[str]:
    """Warning records for presentations whose weights break the OULAD convention."""
    warnings = []
    for (mod, pres), grp in defs.groupby(["code_module", "code_presentation"], sort=True):
        coursework = grp[grp["assessment_type"] != "Exam"]["weight"]
        if len(coursework) and not np.isclose(coursework.sum(), 100.0):
            warnings.append(f"{mod} {pres}: non-exam weights sum to {coursework.sum():g}, expected 100")
        exam = grp[grp["assessment_type"] == "Exam"]["weight"]
        if len(exam) and not np.allclose(exam, 100.0):
            warnings.append(f"{mod} {pres}: exam weight {list(exam)} differs from 100")
    for w in warnings:
        logger.warning(w)
    return warnings


def load_oula(dir_path: str | Path) -> OulaTables:
    """Read studentInfo, assessments and studentAssessment (plus studentRegistration if present)."""
    d = Path(dir_path)
    if not d.is_dir():
        raise FileNotFoundError(f"OULAD directory not found: {d}")
    info, r1 = read_table(d / STUDENT_INFO, STUDENT_INFO_SCHEMA)
    defs, r2 = read_table(d / ASSESSMENTS, ASSESSMENT_SCHEMA)
    defs = defs.rename(columns={"date": "due_day"})
    subs, r3 = read_table(d / STUDENT_ASSESSMENT, SUBMISSION_SCHEMA, optional=("date_submitted", "is_banked"))
    regs, r4 = None, []
    if (d / STUDENT_REGISTRATION).is_file():
        regs, r4 = read_table(d / STUDENT_REGISTRATION, REGISTRATION_SCHEMA, optional=("date_registration",))
    return OulaTables(info, defs, subs, regs, r1 + r2 + r3 + r4, check_assessment_weights(defs))


def derive_label(final_result: str) -> int:
    if final_result in ("Pass", "Distinction"):
        return 1
    if final_result in ("Fail", "Withdrawn"):
        return 0
    raise ValueError(f"unknown final_result {final_result!r}")


def course_categories() -> dict[str, str]:
    with resources.files("oulagraph").joinpath("data/course_categories.csv").open() as fh:
        return {row["code_module"]: row["course_category"] for row in csv.DictReader(fh)}


def registration_id(id_student, code_module, code_presentation) -> str:
    return f"{int(id_student)}_{code_module}_{code_presentation}"


@dataclass
class PreprocessReport:
    n_input: int = 0
    dropped_duplicates: int = 0
    dropped_no_grades: int = 0
    dropped_early_withdrawal: int = 0
    dropped_threshold_inconsistent: int = 0
    n_output: int = 0
    n_students: int = 0
    label_share: dict[int, float] = field(default_factory=dict)
    pass_model: PassWeightModel | None = None

    def summary(self) -> str:
        share = ", ".join(f"label {k}: {100 * v:.2f}%" for k, v in sorted(self.label_share.items()))
        return (f"{self.n_output} records over {self.n_students} students ({share}); dropped "
                f"{self.dropped_no_grades} without grades, {self.dropped_early_withdrawal} early withdrawals, "
                f"{self.dropped_threshold_inconsistent} threshold-inconsistent")


def _inconsistent(table: pd.DataFrame, model: PassWeightModel) -> pd.Series:
    has_exam = table["exam_score"].notna()
    fake_pass = (table["label"] == 1) & (table["exam_score"] < PASS_THRESHOLD)
    fake_fail = (table["label"] == 0) & (model.final_grade(table) >= PASS_THRESHOLD)
    return has_exam & (fake_pass | fake_fail)


def preprocess_with_report(
    rows: pd.DataFrame,
    defs: pd.DataFrame,
    subs: pd.DataFrame,
    registration_dates: pd.DataFrame | None = None,
) -> tuple[pd.DataFrame, PreprocessReport]:
    """Filter, label and sort registrations; see :func:`preprocess`."""
    report = PreprocessReport(n_input=len(rows))
    recs = rows.copy()
    dup = recs.duplicated(KEY, keep="first")
    if dup.any():
        logger.warning("dropping %d duplicate registrations", int(dup.sum()))
    report.dropped_duplicates = int(dup.sum())
    recs = recs[~dup]

    # (1) presentations with no scored submission at all
    scored = subs.loc[subs["score"].notna(), ["id_assessment"]].merge(
        defs[["id_assessment", "code_module", "code_presentation"]], on="id_assessment"
    )
    graded = set(zip(scored["code_module"], scored["code_presentation"]))
    keep = [(m, p) in graded for m, p in zip(recs["code_module"], recs["code_presentation"])]
    report.dropped_no_grades = int(len(recs) - sum(keep))
    recs = recs[np.asarray(keep, dtype=bool)]

    # (2) withdrawals before the start or within the first week
    if registration_dates is not None and len(registration_dates):
        dates = registration_dates.drop_duplicates(KEY)[KEY + ["date_unregistration"]]
        recs = recs.merge(dates, on=KEY, how="left").rename(columns={"date_unregistration": "withdrawal_day"})
    else:
        recs = recs.assign(withdrawal_day=pd.array([None] * len(recs), dtype="Int64"))
    recs["withdrawal_day"] = recs["withdrawal_day"].astype("Int64")
    early = (recs["final_result"] == "Withdrawn") & (recs["withdrawal_day"] <= EARLY_WITHDRAWAL_DAY).fillna(False)
    report.dropped_early_withdrawal = int(early.sum())
    recs = recs[~early.to_numpy(dtype=bool)]

    recs = recs.reset_index(drop=True)
    recs["label"] = [derive_label(r) for r in recs["final_result"]]

    # (3) threshold-inconsistent outliers: fit -> drop -> refit
    inputs = grade_inputs(recs, defs, subs)
    model = PassWeightModel().fit(inputs)
    bad = _inconsistent(inputs, model).to_numpy(dtype=bool)
    report.dropped_threshold_inconsistent = int(bad.sum())
    recs = recs[~bad].reset_index(drop=True)
    report.pass_model = PassWeightModel().fit(inputs[~bad].reset_index(drop=True))

    # (4) labels are merged above; finish the canonical table
    cats = course_categories()
    recs["course_category"] = [cats.get(m, "Unknown") for m in recs["code_module"]]
    recs["registration_id"] = [registration_id(*k) for k in zip(recs["id_student"], recs["code_module"], recs["code_presentation"])]
    recs = recs.sort_values(KEY, kind="mergesort").reset_index(drop=True)[CANONICAL_COLUMNS]

    report.n_output = len(recs)
    report.n_students = int(recs["id_student"].nunique())
    if len(recs):
        share = recs["label"].value_counts(normalize=True)
        report.label_share = {int(k): float(v) for k, v in share.items()}
    return recs, report


def preprocess(
    rows: pd.DataFrame,
    defs: pd.DataFrame,
    subs: pd.DataFrame,
    registration_dates: pd.DataFrame | None = None,
) -> pd.DataFrame:
    """Canonical registration table.

    Steps, in order: drop registrations in presentations without any recorded
    score; drop withdrawals dated on or before day 7; drop records whose label
    contradicts the fitted pass model; merge Pass/Distinction into label 1 and
    Fail/Withdrawn into label 0.  Output is sorted by (student, module,
    presentation).
    """
    return preprocess_with_report(rows, defs, subs, registration_dates)[0]


def write_canonical(records: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records.to_csv(path, index=False)
    return path


def read_canonical(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, keep_default_na=False, na_values=[""])
    df["withdrawal_day"] = df["withdrawal_day"].astype("Int64")
    for c in ("gender", "region", "highest_education", "imd_band", "age_band", "disability",
              "code_module", "code_presentation", "course_category", "final_result", "registration_id"):
        if c in df.columns:
            df[c] = df[c].astype(object).where(df[c].notna(), None)
    return df
