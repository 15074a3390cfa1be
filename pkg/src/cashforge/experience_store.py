"""Store of paper-reported experiment experiences.

An experience says "paper P found algorithm B best on dataset I, beating the
algorithms in O". Papers carry the metadata used to rank their reliability:
level (A-D), venue type, impact factor and average annual citations, compared
lexicographically in that priority order. The rank index of a paper in the
ascending reliability order is the weight its experiences contribute to
relation edges downstream.

File format: JSON Lines, one object per line, discriminated by ``kind``::

    {"kind": "paper", "paper_id": "G3", "level": "B", "venue_type": "Journal",
     "impact_factor": 3.2, "avg_annual_citations": 41}
    {"kind": "experience", "paper_id": "G3", "instance_id": "wine",
     "best_algorithm": "BayesNet", "other_algorithms": ["J48", "OneR"]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import InputError

LEVELS = ("A", "B", "C", "D")
VENUE_TYPES = ("Journal", "Conference")

# Priority order from most to least significant; higher tuple = more reliable.
_LEVEL_SCORE = {lv: i for i, lv in enumerate(reversed(LEVELS))}  # D=0 .. A=3
_VENUE_SCORE = {"Conference": 0, "Journal": 1}


@dataclass(frozen=True)
class PaperMeta:
    """Reliability metadata of one source paper."""

    paper_id: str
    level: str
    venue_type: str
    impact_factor: float = 0.0
    avg_annual_citations: int = 0

    def __post_init__(self):
        if self.level not in LEVELS:
            raise InputError(f"paper {self.paper_id!r}: level must be one of {LEVELS}, got {self.level!r}")
        if self.venue_type not in VENUE_TYPES:
            raise InputError(
                f"paper {self.paper_id!r}: venue_type must be one of {VENUE_TYPES}, got {self.venue_type!r}"
            )
        if self.impact_factor < 0:
            raise InputError(f"paper {self.paper_id!r}: impact_factor must be >= 0")
        if self.avg_annual_citations < 0:
            raise InputError(f"paper {self.paper_id!r}: avg_annual_citations must be >= 0")

    def reliability_key(self) -> tuple:
        """Sort key, ascending = less reliable. Ties resolved by paper_id."""
        return (
            _LEVEL_SCORE[self.level],
            _VENUE_SCORE[self.venue_type],
            self.impact_factor,
            self.avg_annual_citations,
            self.paper_id,
        )


@dataclass(frozen=True)
class ExperienceRecord:
    """One reported comparison: best_algorithm beat other_algorithms on instance_id."""

    paper_id: str
    instance_id: str
    best_algorithm: str
    other_algorithms: frozenset[str]

    def __post_init__(self):
        if not self.other_algorithms:
            raise InputError(
                f"experience ({self.paper_id!r}, {self.instance_id!r}): other_algorithms must be non-empty"
            )
        if self.best_algorithm in self.other_algorithms:
            raise InputError(
                f"experience ({self.paper_id!r}, {self.instance_id!r}): "
                f"best algorithm {self.best_algorithm!r} also listed among the others"
            )


@dataclass(frozen=True)
class ReliabilityRank:
    """Total order over papers, ascending by reliability (least reliable first)."""

    ordering: tuple[str, ...]
    index: Mapping[str, int] = field(hash=False, compare=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "index", {pid: i for i, pid in enumerate(self.ordering)})

    def rank_of(self, paper_id: str) -> int:
        return self.index[paper_id]


def rank_papers(papers: Iterable[PaperMeta]) -> ReliabilityRank:
    """Rank papers ascending by reliability.

    Comparison is strictly lexicographic over (level, venue type, impact
    factor, citations); papers equal on all four criteria are ordered by
    paper_id ascending so the rank is deterministic.
    """
    papers = list(papers)
    if not papers:
        raise InputError("cannot rank an empty paper set")
    ordered = sorted(papers, key=PaperMeta.reliability_key)
    return ReliabilityRank(tuple(p.paper_id for p in ordered))


@dataclass(frozen=True)
class ExperienceStore:
    """Validated papers plus experience records, read-only after load."""

    papers: Mapping[str, PaperMeta]
    records: tuple[ExperienceRecord, ...]

    def instances(self) -> tuple[str, ...]:
        return tuple(sorted({r.instance_id for r in self.records}))

    def records_for(self, instance_id: str) -> tuple[ExperienceRecord, ...]:
        return tuple(r for r in self.records if r.instance_id == instance_id)

    def rank(self) -> ReliabilityRank:
        return rank_papers(self.papers.values())


def _require(obj: dict, key: str, line_no: int):
    if key not in obj:
        raise InputError(f"line {line_no}: missing required field {key!r}")
    return obj[key]


def load_experiences(path: str | Path, aliases: Mapping[str, str] | None = None) -> ExperienceStore:
    """Load and validate an experience JSONL file.

    ``aliases`` optionally maps algorithm-name synonyms onto canonical names
    at ingestion (applied to best and other algorithms alike). Raises
    ``InputError`` on malformed lines (with line number), experiences citing
    unknown papers, or invariant violations.
    """
    aliases = dict(aliases or {})
    papers: dict[str, PaperMeta] = {}
    raw_records: list[tuple[int, dict]] = []

    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path.name} line {line_no}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise InputError(f"{path.name} line {line_no}: expected a JSON object")
            kind = obj.get("kind")
            if kind == "paper":
                try:
                    meta = PaperMeta(
                        paper_id=str(_require(obj, "paper_id", line_no)),
                        level=str(_require(obj, "level", line_no)),
                        venue_type=str(_require(obj, "venue_type", line_no)),
                        impact_factor=float(obj.get("impact_factor", 0.0)),
                        avg_annual_citations=int(obj.get("avg_annual_citations", 0)),
                    )
                except (TypeError, ValueError) as exc:
                    raise InputError(f"{path.name} line {line_no}: {exc}") from exc
                if meta.paper_id in papers:
                    raise InputError(f"{path.name} line {line_no}: duplicate paper_id {meta.paper_id!r}")
                papers[meta.paper_id] = meta
            elif kind == "experience":
                raw_records.append((line_no, obj))
            else:
                raise InputError(f"{path.name} line {line_no}: unknown record kind {kind!r}")

    def canon(name: str) -> str:
        return aliases.get(name, name)

    records = []
    for line_no, obj in raw_records:
        paper_id = str(_require(obj, "paper_id", line_no))
        if paper_id not in papers:
            raise InputError(f"{path.name} line {line_no}: experience cites unknown paper {paper_id!r}")
        others = _require(obj, "other_algorithms", line_no)
        if not isinstance(others, list):
            raise InputError(f"{path.name} line {line_no}: other_algorithms must be a list")
        try:
            record = ExperienceRecord(
                paper_id=paper_id,
                instance_id=str(_require(obj, "instance_id", line_no)),
                best_algorithm=canon(str(_require(obj, "best_algorithm", line_no))),
                other_algorithms=frozenset(canon(str(a)) for a in others),
            )
        except InputError as exc:
            raise InputError(f"{path.name} line {line_no}: {exc}") from exc
        records.append(record)

    return ExperienceStore(papers=papers, records=tuple(records))


def save_experiences(path: str | Path, store: ExperienceStore) -> None:
    """Write a store back to JSONL (papers first, then experiences)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for pid in sorted(store.papers):
            p = store.papers[pid]
            fh.write(
                json.dumps(
                    {
                        "kind": "paper",
                        "paper_id": p.paper_id,
                        "level": p.level,
                        "venue_type": p.venue_type,
                        "impact_factor": p.impact_factor,
                        "avg_annual_citations": p.avg_annual_citations,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
        for r in store.records:
            fh.write(
                json.dumps(
                    {
                        "kind": "experience",
                        "paper_id": r.paper_id,
                        "instance_id": r.instance_id,
                        "best_algorithm": r.best_algorithm,
                        "other_algorithms": sorted(r.other_algorithms),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_aliases(path: str | Path) -> dict[str, str]:
    """Load an algorithm-name alias file: JSON object of {synonym: canonical}."""
    with Path(path).open("r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or not all(isinstance(v, str) for v in obj.values()):
        raise InputError(f"{path}: alias file must be a JSON object of string-to-string mappings")
    return obj
