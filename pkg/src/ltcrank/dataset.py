"""Model corpus loading, validation, and proxy normalization.

A corpus is a set of pretrained-model records. Each record carries the
pretraining configuration (categorical metadata), five pretraining proxy
scores, and three post-finetuning task scores. Perplexity-based proxies are
stored in inverted form (1/PPL) so that higher is better for every proxy.

CSV schema (exact header, comma separated, UTF-8, '.' decimal):

    id,objective,data_config,learning_rate,domain_tagging,length_filter,
    ppl_clm,ppl_sc,kshot_cms,kshot_rag,kshot_cbqa,sft_cms,sft_rag,sft_cbqa

with objective in {clm,sc,plm,sc_clm,ul2,ul2r,ul2r_clm}, data_config in
{dc0..dc5}, domain_tagging in {true,false}, length_filter in {all,mid,max}.
"""

from __future__ import annotations

import csv
import enum
import hashlib
from dataclasses import dataclass, replace
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import CorpusError

PROXY_FIELDS = ("ppl_clm", "ppl_sc", "kshot_cms", "kshot_rag", "kshot_cbqa")
SFT_FIELDS = ("sft_cms", "sft_rag", "sft_cbqa")

CSV_HEADER = (
    "id",
    "objective",
    "data_config",
    "learning_rate",
    "domain_tagging",
    "length_filter",
    *PROXY_FIELDS,
    *SFT_FIELDS,
)

CANONICAL_SIZE = 50


class Objective(enum.Enum):
    CLM = "clm"
    SC = "sc"
    PLM = "plm"
    SC_CLM = "sc_clm"
    UL2 = "ul2"
    UL2R = "ul2r"
    UL2R_CLM = "ul2r_clm"


class DataConfig(enum.Enum):
    DC0 = "dc0"
    DC1 = "dc1"
    DC2 = "dc2"
    DC3 = "dc3"
    DC4 = "dc4"
    DC5 = "dc5"


class LengthFilter(enum.Enum):
    ALL = "all"
    MID = "mid"  # keep lengths in the 25-75% quantile range
    MAX = "max"  # keep the longest 25%


class Normalization(enum.Enum):
    RAW = "raw"
    MINMAX = "minmax"
    ZSCORE = "zscore"


@dataclass(frozen=True)
class PretrainConfig:
    objective: Objective
    data_config: DataConfig
    learning_rate: float
    domain_tagging: bool
    length_filter: LengthFilter


@dataclass(frozen=True)
class ProxyVector:
    """Five pretraining proxy scores; ppl_* hold inverted perplexity."""

    ppl_clm: float
    ppl_sc: float
    kshot_cms: float
    kshot_rag: float
    kshot_cbqa: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in PROXY_FIELDS], dtype=float)


@dataclass(frozen=True)
class SftVector:
    """Post-finetuning task scores (averaged dataset scores per task)."""

    sft_cms: float
    sft_rag: float
    sft_cbqa: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in SFT_FIELDS], dtype=float)


@dataclass(frozen=True)
class ModelRecord:
    id: int
    config: PretrainConfig
    proxies: ProxyVector
    sft: SftVector


@dataclass(frozen=True)
class ModelSet:
    """Immutable, ordered collection of model records.

    `normalization` tracks which transform the proxy columns currently hold;
    range validation applies only to raw data, since normalized proxies may
    leave the raw domain (e.g. z-scores are signed).
    """

    records: tuple[ModelRecord, ...]
    normalization: Normalization = Normalization.RAW

    def __post_init__(self):
        if len(self.records) < 2:
            raise CorpusError("a model set needs at least 2 records")
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise CorpusError(f"duplicate id(s): {dup}")

    def __len__(self) -> int:
        return len(self.records)

    @cached_property
    def ids(self) -> tuple[int, ...]:
        return tuple(r.id for r in self.records)

    @cached_property
    def _index(self) -> dict[int, int]:
        return {r.id: pos for pos, r in enumerate(self.records)}

    def record(self, model_id: int) -> ModelRecord:
        try:
            return self.records[self._index[model_id]]
        except KeyError:
            raise KeyError(f"unknown model id: {model_id}") from None

    def position(self, model_id: int) -> int:
        try:
            return self._index[model_id]
        except KeyError:
            raise KeyError(f"unknown model id: {model_id}") from None

    @cached_property
    def proxy_matrix(self) -> np.ndarray:
        """(n, 5) proxy values in PROXY_FIELDS order; read-only."""
        m = np.array([r.proxies.as_array() for r in self.records])
        m.setflags(write=False)
        return m

    @cached_property
    def sft_matrix(self) -> np.ndarray:
        """(n, 3) task scores in SFT_FIELDS order; read-only."""
        m = np.array([r.sft.as_array() for r in self.records])
        m.setflags(write=False)
        return m

    def subset(self, model_ids) -> "ModelSet":
        """New ModelSet restricted to `model_ids`, preserving record order."""
        wanted = set(model_ids)
        missing = wanted - set(self.ids)
        if missing:
            raise KeyError(f"unknown model id(s): {sorted(missing)}")
        kept = tuple(r for r in self.records if r.id in wanted)
        return ModelSet(records=kept, normalization=self.normalization)


def invert_perplexity(raw_ppl: float) -> float:
    """Map a raw perplexity (>= 1) to 1/perplexity in (0, 1]."""
    if raw_ppl <= 0:
        raise ValueError(f"perplexity must be positive, got {raw_ppl}")
    if raw_ppl < 1:
        raise ValueError(f"perplexity must be >= 1, got {raw_ppl}")
    return 1.0 / raw_ppl


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CorpusError(f"row {row}, column {column!r}: non-numeric value {text!r}") from None
    if not np.isfinite(value):
        raise CorpusError(f"row {row}, column {column!r}: non-finite value {text!r}")
    return value


def _parse_enum(enum_cls, text: str, row: int, column: str):
    try:
        return enum_cls(text)
    except ValueError:
        allowed = [e.value for e in enum_cls]
        raise CorpusError(
            f"row {row}, column {column!r}: {text!r} not in {allowed}"
        ) from None


def _parse_bool(text: str, row: int, column: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise CorpusError(f"row {row}, column {column!r}: expected true/false, got {text!r}")


def _check_range(value: float, lo: float, hi: float, row: int, column: str) -> float:
    if not (lo <= value <= hi):
        raise CorpusError(
            f"row {row}, column {column!r}: value {value} outside [{lo}, {hi}]"
        )
    return value


def _parse_row(raw: dict[str, str], row: int) -> ModelRecord:
    model_id = _parse_float(raw["id"], row, "id")
    if model_id != int(model_id) or model_id <= 0:
        raise CorpusError(f"row {row}, column 'id': expected positive integer, got {raw['id']!r}")
    config = PretrainConfig(
        objective=_parse_enum(Objective, raw["objective"], row, "objective"),
        data_config=_parse_enum(DataConfig, raw["data_config"], row, "data_config"),
        learning_rate=_parse_float(raw["learning_rate"], row, "learning_rate"),
        domain_tagging=_parse_bool(raw["domain_tagging"], row, "domain_tagging"),
        length_filter=_parse_enum(LengthFilter, raw["length_filter"], row, "length_filter"),
    )
    if config.learning_rate <= 0:
        raise CorpusError(f"row {row}, column 'learning_rate': must be > 0")
    proxies = {}
    for field in PROXY_FIELDS:
        value = _parse_float(raw[field], row, field)
        if field.startswith("ppl_"):
            # inverted perplexity: raw PPL >= 1 implies 1/PPL in (0, 1]
            if not (0 < value <= 1):
                raise CorpusError(
                    f"row {row}, column {field!r}: inverted perplexity {value} outside (0, 1]"
                )
        else:
            _check_range(value, 0.0, 100.0, row, field)
        proxies[field] = value
    sft = {f: _check_range(_parse_float(raw[f], row, f), 0.0, 100.0, row, f) for f in SFT_FIELDS}
    return ModelRecord(
        id=int(model_id),
        config=config,
        proxies=ProxyVector(**proxies),
        sft=SftVector(**sft),
    )


def _parse_rows(lines, source: str) -> ModelSet:
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise CorpusError(f"{source}: empty file") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise CorpusError(
            f"{source}: header mismatch; expected {','.join(CSV_HEADER)}"
        )
    records: list[ModelRecord] = []
    seen: dict[int, int] = {}
    for row_number, cells in enumerate(reader, start=2):
        if not cells or (len(cells) == 1 and not cells[0].strip()):
            continue
        if len(cells) != len(CSV_HEADER):
            raise CorpusError(
                f"row {row_number}: expected {len(CSV_HEADER)} fields, got {len(cells)}"
            )
        record = _parse_row(dict(zip(CSV_HEADER, cells)), row_number)
        if record.id in seen:
            raise CorpusError(
                f"row {row_number}: duplicate id {record.id} (first seen at row {seen[record.id]})"
            )
        seen[record.id] = row_number
        records.append(record)
    if len(records) < 2:
        raise CorpusError(f"{source}: need at least 2 data rows, got {len(records)}")
    return ModelSet(records=tuple(records))


def parse_csv(path) -> ModelSet:
    """Parse and validate a corpus CSV file."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        return _parse_rows(f, str(path))


def canonical_csv_bytes() -> bytes:
    """Raw bytes of the bundled 50-model corpus."""
    return resources.files("ltcrank.data").joinpath("canonical.csv").read_bytes()


def canonical_checksum() -> str:
    """SHA-256 of the bundled corpus file."""
    return hashlib.sha256(canonical_csv_bytes()).hexdigest()


def load_canonical() -> ModelSet:
    """Load the bundled 50-model corpus (ids 1..50, raw proxies)."""
    text = canonical_csv_bytes().decode("utf-8")
    mset = _parse_rows(text.splitlines(), "canonical corpus")
    if len(mset) != CANONICAL_SIZE or mset.ids != tuple(range(1, CANONICAL_SIZE + 1)):
        raise CorpusError(
            f"canonical corpus must hold ids 1..{CANONICAL_SIZE}, got {len(mset)} records"
        )
    return mset


def write_csv(mset: ModelSet, path) -> None:
    """Serialize a ModelSet back to the corpus CSV schema.

    Floats are written with repr, which round-trips exactly, so
    parse_csv(write_csv(s)) == s.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for r in mset.records:
            writer.writerow(
                [
                    r.id,
                    r.config.objective.value,
                    r.config.data_config.value,
                    repr(r.config.learning_rate),
                    "true" if r.config.domain_tagging else "false",
                    r.config.length_filter.value,
                    *(repr(getattr(r.proxies, f)) for f in PROXY_FIELDS),
                    *(repr(getattr(r.sft, f)) for f in SFT_FIELDS),
                ]
            )


def normalize_proxies(mset: ModelSet, scheme: Normalization) -> ModelSet:
    """Return a copy with each proxy column normalized; SFT columns untouched.

    MINMAX maps a column's min to 0 and max to 1; a constant column maps to
    all 0.5. ZSCORE maps to mean 0 / population sd 1; a constant column maps
    to all 0. Both transforms are strictly increasing per column, so every
    pairwise proxy comparison keeps its sign.
    """
    if scheme == Normalization.RAW:
        return mset
    if scheme not in (Normalization.MINMAX, Normalization.ZSCORE):
        raise ValueError(f"unsupported normalization: {scheme}")
    matrix = np.array(mset.proxy_matrix)
    if scheme == Normalization.MINMAX:
        lo = matrix.min(axis=0)
        hi = matrix.max(axis=0)
        span = hi - lo
        degenerate = span == 0
        span = np.where(degenerate, 1.0, span)
        matrix = (matrix - lo) / span
        matrix[:, degenerate] = 0.5
    else:
        mean = matrix.mean(axis=0)
        sd = matrix.std(axis=0)
        sd = np.where(sd == 0, 1.0, sd)
        matrix = (matrix - mean) / sd
    records = tuple(
        replace(r, proxies=ProxyVector(**dict(zip(PROXY_FIELDS, row))))
        for r, row in zip(mset.records, matrix.tolist())
    )
    return ModelSet(records=records, normalization=scheme)
