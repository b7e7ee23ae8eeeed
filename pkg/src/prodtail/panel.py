"""Firm-year panel ingestion, cleaning, variable construction and grouping.

Input schema (CSV header): firm_id, year, country, account_type, size_class,
nace4, wages, ebit, employment, and optionally operating_revenue,
total_assets.  Deflator CSV: country, nace2, year, va_deflator,
output_deflator, capital_deflator.

Cleaning rules: drop rows with missing firm_id/year, years outside the
configured window, consolidated-with-companion accounts (double counting)
and duplicated (firm_id, year) pairs; negative wages / employment /
operating revenue / total assets are nulled but the row is kept (EBIT may
legitimately be negative).  Every dropped row lands exactly once in the
rejection log with a reason code.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, InvalidParameterError
from .mcculloch import QUANTILE_METHOD, QuantileSummary

__all__ = [
    "IngestConfig",
    "IngestResult",
    "PanelGroup",
    "DispersionMetrics",
    "ingest",
    "clean_records",
    "load_deflators",
    "deflate",
    "compute_lp",
    "compute_dlp",
    "add_log_variables",
    "log_transform",
    "sector_of_nace4",
    "derive_size_class",
    "group_records",
    "variable_values",
    "trim",
    "dispersion_metrics",
    "GROUP_THRESHOLDS",
    "VARIABLES",
    "BROAD_SECTORS",
]

REQUIRED_COLUMNS = [
    "firm_id", "year", "country", "account_type", "size_class", "nace4",
    "wages", "ebit", "employment",
]
OPTIONAL_COLUMNS = ["operating_revenue", "total_assets"]

ACCOUNT_TYPES = {"unconsolidated", "consolidated", "consolidated_with_companion"}

# fields where a negative value is treated as missing (the row survives)
NEGATIVE_AS_MISSING = ["wages", "employment", "operating_revenue", "total_assets"]

VARIABLES = ("lp", "dlp", "log_lp", "log_growth")

GROUP_THRESHOLDS = {
    "country-year": 10000,
    "country-size": 5000,
    "country-sector": 1000,
}

BROAD_SECTORS = ("Agr", "Manu", "Energy", "Cons", "NF-Serv", "Info", "FIRE", "NM-Serv")

# NACE Rev. 2 division ranges -> section letter
_NACE_SECTIONS = [
    (1, 3, "A"), (5, 9, "B"), (10, 33, "C"), (35, 35, "D"), (36, 39, "E"),
    (41, 43, "F"), (45, 47, "G"), (49, 53, "H"), (55, 56, "I"), (58, 63, "J"),
    (64, 66, "K"), (68, 68, "L"), (69, 75, "M"), (77, 82, "N"), (84, 84, "O"),
    (85, 85, "P"), (86, 88, "Q"), (90, 93, "R"), (94, 96, "S"),
    (97, 98, "T"), (99, 99, "U"),
]

_SECTION_TO_BROAD = {
    "A": "Agr", "B": "Agr",
    "C": "Manu",
    "D": "Energy", "E": "Energy",
    "F": "Cons",
    "G": "NF-Serv", "H": "NF-Serv", "I": "NF-Serv", "N": "NF-Serv",
    "R": "NF-Serv", "S": "NF-Serv",
    "J": "Info",
    "K": "FIRE", "L": "FIRE", "M": "FIRE",
    "O": "NM-Serv", "P": "NM-Serv", "Q": "NM-Serv",
}


@dataclass(frozen=True)
class IngestConfig:
    year_min: int = 2006
    year_max: int = 2015
    currency_by_country: dict = field(default_factory=dict)

    def currency(self, country: str) -> str:
        return self.currency_by_country.get(country, "LCU")


@dataclass
class IngestResult:
    records: pd.DataFrame
    rejections: pd.DataFrame     # columns: row, firm_id, year, reason_code
    nulled_counts: dict


def _empty_rejections() -> pd.DataFrame:
    return pd.DataFrame(columns=["row", "firm_id", "year", "reason_code"])


def ingest(source, config: IngestConfig | None = None) -> IngestResult:
    """Parse and clean a panel CSV (file path or open text buffer)."""
    config = config or IngestConfig()
    malformed: list[list[str]] = []

    def on_bad(fields: list[str]) -> None:
        malformed.append(fields)
        return None

    def read(handle) -> pd.DataFrame:
        try:
            return pd.read_csv(handle, dtype=str, engine="python", on_bad_lines=on_bad,
                               skipinitialspace=True)
        except pd.errors.EmptyDataError:
            raise DataError("input CSV is empty")

    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            df = read(handle)
    else:
        df = read(source)
    missing_cols = [c for c in REQUIRED_COLUMNS if c not in df.columns]
    if missing_cols:
        raise DataError(f"malformed header: missing columns {missing_cols}")
    for c in OPTIONAL_COLUMNS:
        if c not in df.columns:
            df[c] = np.nan
    df = df[REQUIRED_COLUMNS[:6] + ["wages", "ebit", "employment"] + OPTIONAL_COLUMNS]
    df.insert(0, "row", np.arange(2, len(df) + 2))  # 1-based file line, after header
    records, rejections, nulled = clean_records(df, config)
    if malformed:
        extra = pd.DataFrame({
            "row": [-1] * len(malformed),
            "firm_id": ["" for _ in malformed],
            "year": [pd.NA for _ in malformed],
            "reason_code": ["malformed_row"] * len(malformed),
        })
        rejections = pd.concat([rejections, extra], ignore_index=True)
    return IngestResult(records=records, rejections=rejections, nulled_counts=nulled)


def clean_records(df: pd.DataFrame, config: IngestConfig | None = None
                  ) -> tuple[pd.DataFrame, pd.DataFrame, dict]:
    """Apply the cleaning rules to a raw string-typed frame.

    Returns (clean records, rejection log, per-field nulled counts).
    Idempotent: cleaning an already-clean frame rejects nothing.
    """
    config = config or IngestConfig()
    df = df.copy()
    if "row" not in df.columns:
        df.insert(0, "row", np.arange(len(df)))
    for c in OPTIONAL_COLUMNS:
        if c not in df.columns:
            df[c] = np.nan
    reasons = pd.Series("", index=df.index, dtype=object)

    firm_id = df["firm_id"].astype("string").str.strip()
    no_id = firm_id.isna() | (firm_id == "")
    reasons[no_id & (reasons == "")] = "missing_firm_id"

    year = pd.to_numeric(df["year"], errors="coerce")
    no_year = year.isna()
    reasons[no_year & (reasons == "")] = "missing_year"
    bad_year = ~no_year & ((year < config.year_min) | (year > config.year_max))
    reasons[bad_year & (reasons == "")] = "year_out_of_window"

    acct = df["account_type"].astype("string").str.strip().str.lower()
    companion = acct == "consolidated_with_companion"
    reasons[companion & (reasons == "")] = "companion_account"
    bad_acct = ~acct.isin(ACCOUNT_TYPES) | acct.isna()
    reasons[bad_acct & (reasons == "")] = "invalid_account_type"

    # de-duplicate (firm_id, year) among rows that survive so far: first wins
    alive = reasons == ""
    dup = pd.Series(False, index=df.index)
    dup.loc[alive] = (
        pd.DataFrame({"f": firm_id[alive], "y": year[alive]})
        .duplicated(keep="first")
        .to_numpy()
    )
    reasons[dup] = "duplicate_firm_year"

    rejected_mask = reasons != ""
    rejections = pd.DataFrame({
        "row": df.loc[rejected_mask, "row"].to_numpy(),
        "firm_id": firm_id[rejected_mask].fillna("").to_numpy(),
        "year": year[rejected_mask].to_numpy(),
        "reason_code": reasons[rejected_mask].to_numpy(),
    })

    out = df.loc[~rejected_mask].copy()
    out["firm_id"] = firm_id[~rejected_mask]
    out["year"] = year[~rejected_mask].astype(int)
    out["account_type"] = acct[~rejected_mask]
    out["country"] = out["country"].astype("string").str.strip()
    out["size_class"] = out["size_class"].astype("string").str.strip().str.upper()
    out["nace4"] = out["nace4"].astype("string").str.strip()

    nulled: dict[str, int] = {}
    for col in ["wages", "ebit", "employment", "operating_revenue", "total_assets"]:
        vals = pd.to_numeric(out[col], errors="coerce")
        before = vals.notna().sum()
        if col in NEGATIVE_AS_MISSING:
            vals = vals.where(vals >= 0.0)
        nulled[col] = int(before - vals.notna().sum())
        out[col] = vals.astype(float)
    return out.reset_index(drop=True), rejections, nulled


# ---------------------------------------------------------------------------
# deflation and variables
# ---------------------------------------------------------------------------

def load_deflators(source) -> pd.DataFrame:
    df = pd.read_csv(source)
    needed = {"country", "nace2", "year", "va_deflator"}
    if not needed.issubset(df.columns):
        raise DataError(f"deflator table must have columns {sorted(needed)}")
    if (df["va_deflator"] <= 0).any():
        raise DataError("deflators must be positive")
    df = df.copy()
    df["nace2"] = df["nace2"].astype(str).str.zfill(2)
    return df


def deflate(records: pd.DataFrame, deflators: pd.DataFrame | None
            ) -> tuple[pd.DataFrame, dict]:
    """Divide wages and EBIT by the value-added deflator for (country, nace2, year).

    Rows without a matching deflator are flagged (`deflator_missing`) and
    excluded from value-added variables downstream.  With deflators=None the
    data is passed through unflagged (deflator 1.0).
    """
    out = records.copy()
    out["nace2"] = out["nace4"].astype("string").str.slice(0, 2).str.zfill(2)
    if deflators is None:
        out["deflator_missing"] = False
        return out, {"matched": len(out), "missing": 0}
    key = ["country", "nace2", "year"]
    tab = deflators[key + ["va_deflator"]].drop_duplicates(subset=key)
    merged = out.merge(tab, on=key, how="left")
    missing = merged["va_deflator"].isna()
    merged.loc[~missing, "wages"] = merged.loc[~missing, "wages"] / merged.loc[~missing, "va_deflator"]
    merged.loc[~missing, "ebit"] = merged.loc[~missing, "ebit"] / merged.loc[~missing, "va_deflator"]
    merged["deflator_missing"] = missing
    merged = merged.drop(columns=["va_deflator"])
    return merged, {"matched": int((~missing).sum()), "missing": int(missing.sum())}


def compute_lp(records: pd.DataFrame) -> pd.DataFrame:
    """Labor productivity: (wages + ebit) / employment, possibly negative.

    Null when employment is missing or zero, when either component is
    missing, or when the row lacks a deflator match.
    """
    out = records.copy()
    ok = (
        out["employment"].notna() & (out["employment"] > 0)
        & out["wages"].notna() & out["ebit"].notna()
    )
    if "deflator_missing" in out.columns:
        ok &= ~out["deflator_missing"].astype(bool)
    lp = (out["wages"] + out["ebit"]) / out["employment"]
    out["lp"] = lp.where(ok)
    return out


def compute_dlp(records: pd.DataFrame) -> pd.DataFrame:
    """Year-over-year LP difference for consecutive years of the same firm."""
    out = records.sort_values(["firm_id", "year"]).copy()
    grp = out.groupby("firm_id", sort=False)
    prev_lp = grp["lp"].shift(1)
    prev_year = grp["year"].shift(1)
    consecutive = (out["year"] - prev_year) == 1
    out["dlp"] = (out["lp"] - prev_lp).where(consecutive)
    return out


def log_transform(values: np.ndarray) -> tuple[np.ndarray, int]:
    """Natural log of the positive entries; returns (logs, excluded count)."""
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    positive = finite[finite > 0.0]
    return np.log(positive), int(finite.size - positive.size)


def add_log_variables(records: pd.DataFrame) -> pd.DataFrame:
    """log LP (positive LP only) and log growth on consecutive positive pairs."""
    out = records.sort_values(["firm_id", "year"]).copy()
    out["log_lp"] = np.log(out["lp"].where(out["lp"] > 0))
    grp = out.groupby("firm_id", sort=False)
    prev_log = grp["log_lp"].shift(1)
    prev_year = grp["year"].shift(1)
    consecutive = (out["year"] - prev_year) == 1
    out["log_growth"] = (out["log_lp"] - prev_log).where(consecutive)
    return out


# ---------------------------------------------------------------------------
# grouping
# ---------------------------------------------------------------------------

def sector_of_nace4(nace4) -> str | None:
    """Map a 4-digit NACE Rev. 2 code to one of the eight broad sectors.

    Codes stored as integers may have lost a leading zero (111 is 01.11),
    so the division is the code divided by 100 for 3- and 4-digit inputs.
    """
    s = str(nace4).strip()
    if not s.isdigit():
        return None
    division = int(s) // 100 if len(s) >= 3 else int(s)
    for lo, hi, section in _NACE_SECTIONS:
        if lo <= division <= hi:
            return _SECTION_TO_BROAD.get(section)
    return None


_SIZE_RULES = (
    # (class, revenue, assets, employees) thresholds, largest first
    ("V", 100e6, 200e6, 1000),
    ("L", 10e6, 20e6, 150),
    ("M", 1e6, 2e6, 15),
)


def derive_size_class(operating_revenue, total_assets, employment) -> str:
    """Size class from revenue / assets / employee thresholds (fallback when
    the vendor size column is absent)."""
    def at_least(v, cut):
        return v is not None and not (isinstance(v, float) and np.isnan(v)) and v >= cut

    for label, rev, assets, emp in _SIZE_RULES:
        if at_least(operating_revenue, rev) or at_least(total_assets, assets) \
                or at_least(employment, emp):
            return label
    return "S"


@dataclass
class PanelGroup:
    key: tuple
    dimension: str
    variable: str
    values: np.ndarray
    n: int
    negative_share: float
    below_threshold: bool
    currency: str

    @property
    def label(self) -> str:
        return "|".join(str(k) for k in self.key)


def variable_values(records: pd.DataFrame, variable: str) -> pd.Series:
    if variable not in VARIABLES:
        raise InvalidParameterError(f"variable must be one of {VARIABLES}, got {variable}")
    if variable not in records.columns:
        raise DataError(f"column {variable} not present; run the variable constructors first")
    return records[variable]


def group_records(records: pd.DataFrame, dimension: str, variable: str,
                  config: IngestConfig | None = None,
                  min_n: int | None = None) -> list[PanelGroup]:
    """Partition records into groups and collect the chosen variable.

    Dimensions: country-year, country-size, country-sector (eight broad
    sectors).  Groups under the dimension's observation threshold are
    returned flagged `below_threshold` and are skipped by fitting.
    """
    config = config or IngestConfig()
    if dimension not in GROUP_THRESHOLDS:
        raise InvalidParameterError(f"dimension must be one of {sorted(GROUP_THRESHOLDS)}")
    threshold = GROUP_THRESHOLDS[dimension] if min_n is None else min_n
    df = records.copy()
    if dimension == "country-year":
        keys = ["country", "year"]
    elif dimension == "country-size":
        if df["size_class"].isna().any() or (df["size_class"] == "").any():
            fallback = df.apply(
                lambda r: derive_size_class(r.get("operating_revenue"),
                                            r.get("total_assets"), r.get("employment")),
                axis=1,
            )
            blank = df["size_class"].isna() | (df["size_class"] == "")
            df.loc[blank, "size_class"] = fallback[blank]
        keys = ["country", "size_class"]
    else:
        df["sector"] = df["nace4"].map(sector_of_nace4)
        df = df[df["sector"].notna()]
        keys = ["country", "sector"]

    vals = variable_values(df, variable)
    groups = []
    for key, sub in df.groupby(keys, sort=True, dropna=False):
        v = vals.loc[sub.index].dropna().to_numpy(dtype=float)
        if v.size == 0:
            continue
        neg = float(np.mean(v < 0.0))
        groups.append(PanelGroup(
            key=tuple(key),
            dimension=dimension,
            variable=variable,
            values=v,
            n=int(v.size),
            negative_share=neg,
            below_threshold=v.size < threshold,
            currency=config.currency(str(key[0])),
        ))
    return groups


# ---------------------------------------------------------------------------
# dispersion
# ---------------------------------------------------------------------------

def trim(values: np.ndarray, fraction: float = 0.0025) -> np.ndarray:
    """Cut the top and bottom `fraction` of observations (order statistics).

    Used for visualization and KL binning only; fitting runs on untrimmed
    samples (the quantile estimator does not need the cut).
    """
    if not (0.0 <= fraction < 0.5):
        raise InvalidParameterError(f"fraction must be in [0, 0.5), got {fraction}")
    values = np.sort(np.asarray(values, dtype=float))
    k = int(values.size * fraction)
    return values[k: values.size - k] if k else values


@dataclass(frozen=True)
class DispersionMetrics:
    iqr_90_10: float
    iqr_75_25: float
    std: float
    quantile_summary: QuantileSummary
    heavy_tail_warning: bool = False

    def to_dict(self) -> dict:
        qs = self.quantile_summary
        return {
            "iqr_90_10": self.iqr_90_10,
            "iqr_75_25": self.iqr_75_25,
            "std": self.std,
            "quantiles": {"q05": qs.q05, "q25": qs.q25, "q50": qs.q50,
                          "q75": qs.q75, "q95": qs.q95, "n": qs.n},
            "heavy_tail_warning": self.heavy_tail_warning,
        }


def dispersion_metrics(values: np.ndarray, fitted_alpha: float | None = None
                       ) -> DispersionMetrics:
    """Interquantile ranges, sample std and the released five-quantile summary.

    When a fitted tail exponent below 2 accompanies the sample, the std is
    emitted with a heavy-tail warning: it grows with sample size and is not
    a stable dispersion measure in that regime.
    """
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size < 2:
        raise DataError("need at least 2 finite observations")
    q10, q90 = np.quantile(values, [0.10, 0.90], method=QUANTILE_METHOD)
    q25, q75 = np.quantile(values, [0.25, 0.75], method=QUANTILE_METHOD)
    return DispersionMetrics(
        iqr_90_10=float(q90 - q10),
        iqr_75_25=float(q75 - q25),
        std=float(values.std(ddof=1)),
        quantile_summary=QuantileSummary.from_sample(values),
        heavy_tail_warning=bool(fitted_alpha is not None and fitted_alpha < 2.0),
    )
