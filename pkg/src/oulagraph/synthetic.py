"""Synthetic data in the OULAD file layout.

Used for fixtures and smoke runs when the real download is not at hand.  The
generator keeps the structural properties the pipeline relies on: several
presentations per module, coursework weights summing to 100 plus a 100-weight
exam, repeat registrations of the same student, early withdrawals, missing IMD
bands and missing scores.  Outcomes follow a latent ability so that the
Partial Grade is predictive and improves over the semester.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

MODULES = ("AAA", "BBB", "CCC", "DDD", "EEE", "FFF", "GGG")
PRESENTATIONS = ("2013B", "2013J", "2014B", "2014J")
REGIONS = (
    "East Anglian Region", "East Midlands Region", "Ireland", "London Region", "North Region",
    "North Western Region", "Scotland", "South East Region", "South Region", "South West Region",
    "Wales", "West Midlands Region", "Yorkshire Region",
)
EDUCATION = ("No Formal quals", "Lower Than A Level", "A Level or Equivalent", "HE Qualification",
             "Post Graduate Qualification")
IMD_BANDS = ("0-10%", "10-20", "20-30%", "30-40%", "40-50%", "50-60%", "60-70%", "70-80%", "80-90%", "90-100%")
AGE_BANDS = ("0-35", "35-55", "55<=")


def _assessments(rng: np.random.Generator) -> pd.DataFrame:
    rows = []
    aid = 1000
    for m in MODULES:
        for p in PRESENTATIONS:
            n_tma = int(rng.integers(3, 7))
            due = np.sort(rng.choice(np.arange(15, 235), size=n_tma, replace=False))
            w = rng.multinomial(100 - 5 * n_tma, np.full(n_tma, 1 / n_tma)) + 5
            for d, wt in zip(due, w):
                rows.append((m, p, aid, "TMA" if rng.random() < 0.7 else "CMA", int(d), float(wt)))
                aid += 1
            exam_day = None if rng.random() < 0.3 else int(rng.integers(240, 270))
            rows.append((m, p, aid, "Exam", exam_day, 100.0))
            aid += 1
    return pd.DataFrame(rows, columns=["code_module", "code_presentation", "id_assessment",
                                       "assessment_type", "date", "weight"])


def generate(n_students: int = 400, seed: int = 0, exam_share: float = 0.9) -> dict[str, pd.DataFrame]:
    """Return the four OULAD tables keyed by their file names."""
    rng = np.random.default_rng(seed)
    defs = _assessments(rng)
    info_rows, sub_rows, reg_rows = [], [], []
    for s in range(n_students):
        sid = 10000 + 7 * s
        ability = rng.normal()
        demo = dict(
            gender=str(rng.choice(["M", "F"])),
            region=str(rng.choice(REGIONS)),
            highest_education=str(rng.choice(EDUCATION, p=[0.02, 0.4, 0.43, 0.14, 0.01])),
            imd_band=str(rng.choice(IMD_BANDS)) if rng.random() > 0.04 else "",
            age_band=str(rng.choice(AGE_BANDS, p=[0.7, 0.28, 0.02])),
            disability=str(rng.choice(["N", "Y"], p=[0.9, 0.1])),
        )
        n_reg = int(rng.choice([1, 1, 1, 1, 1, 2, 2, 3]))
        combos = rng.choice(len(MODULES) * len(PRESENTATIONS), size=n_reg, replace=False)
        for c in combos:
            mod, pres = MODULES[c // len(PRESENTATIONS)], PRESENTATIONS[c % len(PRESENTATIONS)]
            course = defs[(defs.code_module == mod) & (defs.code_presentation == pres)]
            effort = ability + rng.normal(scale=0.6)
            withdraw_day = None
            if rng.random() < 1 / (1 + np.exp(2.0 + 1.5 * effort)):
                withdraw_day = int(rng.integers(-30, 200))
            x = 0.0
            for aid, atype, due, wt in course[["id_assessment", "assessment_type", "date", "weight"]].itertuples(index=False):
                if atype == "Exam":
                    continue
                if withdraw_day is not None and due > withdraw_day:
                    continue
                if rng.random() < 0.08 + 0.1 * (effort < -1):
                    continue
                score = float(np.clip(np.round(62 + 18 * effort + rng.normal(scale=10)), 0, 100))
                missing = rng.random() < 0.005
                sub_rows.append((aid, sid, int(due) - int(rng.integers(0, 5)), 0, "" if missing else score))
                x += wt / 100 * (0 if missing else score)
            exam_id = int(course[course.assessment_type == "Exam"]["id_assessment"].iloc[0])
            if withdraw_day is not None:
                result = "Withdrawn"
            else:
                y = float(np.clip(np.round(45 + 22 * effort + rng.normal(scale=12)), 0, 100))
                if mod != "GGG":
                    sub_rows.append((exam_id, sid, 250, 0, y))
                grade = (1 - exam_share) * x + exam_share * y
                result = "Distinction" if grade >= 75 else "Pass" if grade >= 40 else "Fail"
            info_rows.append(dict(
                code_module=mod, code_presentation=pres, id_student=sid, **demo,
                num_of_prev_attempts=int(rng.choice([0, 0, 0, 0, 1, 1, 2])),
                studied_credits=int(rng.choice([30, 60, 60, 90, 120])),
                final_result=result,
            ))
            reg_rows.append((mod, pres, sid, int(rng.integers(-100, 0)), "" if withdraw_day is None else withdraw_day))
    info = pd.DataFrame(info_rows, columns=[
        "code_module", "code_presentation", "id_student", "gender", "region", "highest_education", "imd_band",
        "age_band", "num_of_prev_attempts", "studied_credits", "disability", "final_result",
    ])
    subs = pd.DataFrame(sub_rows, columns=["id_assessment", "id_student", "date_submitted", "is_banked", "score"])
    regs = pd.DataFrame(reg_rows, columns=["code_module", "code_presentation", "id_student",
                                           "date_registration", "date_unregistration"])
    defs = defs.astype({"date": "Int64"})
    return {
        "studentInfo.csv": info,
        "assessments.csv": defs,
        "studentAssessment.csv": subs,
        "studentRegistration.csv": regs,
    }


def write(out_dir: str | Path, n_students: int = 400, seed: int = 0) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, df in generate(n_students, seed).items():
        df.to_csv(out_dir / name, index=False)
    return out_dir
