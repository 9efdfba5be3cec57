"""Profile records, the profile text format, and directory-backed stores.

A profile is a named multi-locus record. Each locus entry is either a pair
of allele-vector designations (resolved through the notation module) or an
explicit list of GPM cells. The text format is line based::

    PROFILE <id>
    META <key> <value ...>
    LOCUS <name> VEC <designation> VEC <designation> [TAG <t> <t>]
    LOCUS <name> GPM
    CELL <allele_i> <allele_j> <cell probability>

A blank line terminates a profile; a file may hold several. CELL rows give
matrix cells (an off-diagonal cell is half the heterozygote probability)
and setting (i, j) also sets (j, i). The optional TAG pair records the
mixture role the vectors were assigned during encoding (major / minor /
either); a stored profile always describes a single donor, so tags do not
change how the entry resolves. Mixtures are stored as separate major and
minor profiles.

A store on disk is a directory with an ``index.txt`` naming one profile
file per line. Imports are all-or-nothing per file: every profile must
parse and resolve against the frequency set before any is committed.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .core import GPM, AlleleVector, assert_valid_gpm
from .errors import DataValidationError, InputParseError
from .notation import ContributorTag, assemble_single, designation_alleles, parse_designation

INDEX_FILENAME = "index.txt"

_SAFE_FILENAME = re.compile(r"[^A-Za-z0-9._-]")


@dataclass(frozen=True)
class VectorEntry:
    """Locus entry as two designation strings, optionally tagged."""

    designations: tuple[str, str]
    tags: tuple[ContributorTag, ContributorTag] | None = None


@dataclass(frozen=True)
class CellEntry:
    """Locus entry as explicit GPM cells (allele_i, allele_j, value)."""

    cells: tuple[tuple[str, str, float], ...]


LocusEntry = VectorEntry | CellEntry


@dataclass(frozen=True)
class Profile:
    """A named multi-locus profile with free-form metadata."""

    id: str
    metadata: Mapping[str, str]
    loci: Mapping[str, LocusEntry]

    def __post_init__(self):
        if not self.id:
            raise DataValidationError("profile id must be non-empty")
        object.__setattr__(self, "metadata", dict(self.metadata))
        object.__setattr__(self, "loci", dict(self.loci))


def profile_alleles(profile: Profile) -> dict[str, set[str]]:
    """Allele labels referenced per locus, without resolving anything."""
    out: dict[str, set[str]] = {}
    for name, entry in profile.loci.items():
        labels = out.setdefault(name, set())
        if isinstance(entry, VectorEntry):
            for text in entry.designations:
                labels.update(designation_alleles(text))
        else:
            for ai, aj, _ in entry.cells:
                labels.add(ai)
                labels.add(aj)
    return out


def resolve_profile(profile: Profile, freqs: Mapping[str, AlleleVector]) -> dict[str, GPM]:
    """Resolve every locus entry of a profile into a validated GPM."""
    out: dict[str, GPM] = {}
    for name, entry in profile.loci.items():
        if name not in freqs:
            raise DataValidationError(
                f"profile '{profile.id}': locus '{name}' is not in the frequency set"
            )
        b = freqs[name]
        context = f"profile '{profile.id}', locus '{name}'"
        if isinstance(entry, VectorEntry):
            try:
                u = parse_designation(entry.designations[0], b)
                v = parse_designation(entry.designations[1], b)
            except InputParseError as exc:
                raise InputParseError(f"{context}: {exc}") from None
            # Valid by construction: allele-vector invariants carry through
            # the symmetric product.
            gpm = assemble_single(u, v)
        else:
            gpm = _gpm_from_cells(entry, b, context)
            assert_valid_gpm(gpm, context)
        out[name] = gpm
    return out


def _gpm_from_cells(entry: CellEntry, b: AlleleVector, context: str) -> GPM:
    locus = b.locus
    entries = np.zeros((locus.k, locus.k))
    seen: set[tuple[int, int]] = set()
    for ai, aj, value in entry.cells:
        i = locus.index(ai)
        j = locus.index(aj)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DataValidationError(f"{context}: duplicate cell row for ({ai}, {aj})")
        seen.add(key)
        if value < 0 or not math.isfinite(value):
            raise DataValidationError(f"{context}: bad cell value {value!r} for ({ai}, {aj})")
        entries[i, j] = value
        entries[j, i] = value
    return GPM(locus, entries)


def parse_profiles(text: str) -> list[Profile]:
    """Parse the profile text format; see the module docstring."""
    profiles: list[Profile] = []
    seen_ids: set[str] = set()
    cur_id: str | None = None
    cur_meta: dict[str, str] = {}
    cur_loci: dict[str, LocusEntry] = {}
    pending_gpm: str | None = None
    pending_cells: list[tuple[str, str, float]] = []

    def close_pending():
        nonlocal pending_gpm, pending_cells
        if pending_gpm is not None:
            cur_loci[pending_gpm] = CellEntry(tuple(pending_cells))
            pending_gpm = None
            pending_cells = []

    def close_profile(lineno: int):
        nonlocal cur_id, cur_meta, cur_loci
        if cur_id is None:
            return
        close_pending()
        if cur_id in seen_ids:
            raise DataValidationError(f"duplicate profile id '{cur_id}' (line {lineno})")
        seen_ids.add(cur_id)
        profiles.append(Profile(cur_id, cur_meta, cur_loci))
        cur_id = None
        cur_meta = {}
        cur_loci = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            close_profile(lineno)
            continue
        tokens = line.split()
        keyword = tokens[0]
        if keyword == "PROFILE":
            if cur_id is not None:
                raise InputParseError(
                    "PROFILE inside an open profile (missing blank separator)", line=lineno
                )
            if len(tokens) != 2:
                raise InputParseError("PROFILE takes exactly one id token", line=lineno)
            cur_id = tokens[1]
            continue
        if cur_id is None:
            raise InputParseError(f"'{keyword}' outside any profile", line=lineno)
        if keyword == "META":
            close_pending()
            if len(tokens) < 3:
                raise InputParseError("META needs a key and a value", line=lineno)
            key = tokens[1]
            if key in cur_meta:
                raise InputParseError(f"duplicate META key '{key}'", line=lineno)
            cur_meta[key] = " ".join(tokens[2:])
        elif keyword == "LOCUS":
            close_pending()
            entry, name = _parse_locus_line(tokens, lineno)
            if name in cur_loci or name == pending_gpm:
                raise InputParseError(f"duplicate locus '{name}' in profile", line=lineno)
            if entry is None:
                pending_gpm = name
            else:
                cur_loci[name] = entry
        elif keyword == "CELL":
            if pending_gpm is None:
                raise InputParseError("CELL outside a 'LOCUS <name> GPM' block", line=lineno)
            if len(tokens) != 4:
                raise InputParseError("CELL takes allele_i, allele_j and a value", line=lineno)
            try:
                value = float(tokens[3])
            except ValueError:
                raise InputParseError(f"unreadable cell value '{tokens[3]}'", line=lineno) from None
            pending_cells.append((tokens[1], tokens[2], value))
        else:
            raise InputParseError(f"unknown keyword '{keyword}'", line=lineno)
    close_profile(len(text.splitlines()) + 1)
    return profiles


def _parse_locus_line(tokens: list[str], lineno: int) -> tuple[LocusEntry | None, str]:
    if len(tokens) < 3:
        raise InputParseError("LOCUS needs a name and an entry form", line=lineno)
    name = tokens[1]
    if tokens[2] == "GPM":
        if len(tokens) != 3:
            raise InputParseError("'LOCUS <name> GPM' takes nothing further", line=lineno)
        return None, name
    if len(tokens) not in (6, 9) or tokens[2] != "VEC" or tokens[4] != "VEC":
        raise InputParseError(
            "expected 'LOCUS <name> VEC <d> VEC <d> [TAG <t> <t>]' or 'LOCUS <name> GPM'",
            line=lineno,
        )
    designations = (tokens[3], tokens[5])
    tags = None
    if len(tokens) == 9:
        if tokens[6] != "TAG":
            raise InputParseError("expected TAG before the final two tokens", line=lineno)
        try:
            tags = (ContributorTag(tokens[7]), ContributorTag(tokens[8]))
        except ValueError:
            raise InputParseError(
                f"tags must be major, minor or either, got '{tokens[7]} {tokens[8]}'", line=lineno
            ) from None
    return VectorEntry(designations, tags), name


def format_profile(profile: Profile) -> str:
    """Render a profile back into the text format (inverse of parsing)."""
    lines = [f"PROFILE {profile.id}"]
    for key, value in profile.metadata.items():
        lines.append(f"META {key} {value}")
    for name, entry in profile.loci.items():
        if isinstance(entry, VectorEntry):
            line = f"LOCUS {name} VEC {entry.designations[0]} VEC {entry.designations[1]}"
            if entry.tags is not None:
                line += f" TAG {entry.tags[0].value} {entry.tags[1].value}"
            lines.append(line)
        else:
            lines.append(f"LOCUS {name} GPM")
            for ai, aj, value in entry.cells:
                lines.append(f"CELL {ai} {aj} {value!r}")
    return "\n".join(lines) + "\n"


class ProfileStore:
    """An id-keyed collection of profiles, optionally directory backed.

    The store is immutable during a search; imports are the only writes
    and are single-writer by convention.
    """

    def __init__(self, profiles: Iterator[Profile] | list[Profile] = ()):
        self._profiles: dict[str, Profile] = {}
        for p in profiles:
            self.add(p)

    def add(self, profile: Profile) -> None:
        if profile.id in self._profiles:
            raise DataValidationError(f"duplicate profile id '{profile.id}'")
        self._profiles[profile.id] = profile

    def get(self, profile_id: str) -> Profile:
        try:
            return self._profiles[profile_id]
        except KeyError:
            raise DataValidationError(f"no profile with id '{profile_id}'") from None

    def ids(self) -> list[str]:
        return list(self._profiles)

    def __contains__(self, profile_id: str) -> bool:
        return profile_id in self._profiles

    def __iter__(self) -> Iterator[Profile]:
        return iter(self._profiles.values())

    def __len__(self) -> int:
        return len(self._profiles)

    def import_text(self, text: str, freqs: Mapping[str, AlleleVector]) -> list[Profile]:
        """Parse, resolve and commit profiles from one file's text.

        All-or-nothing: every profile must resolve cleanly against the
        frequency set and no id may collide before anything is committed.
        Returns the committed profiles.
        """
        parsed = parse_profiles(text)
        for p in parsed:
            if p.id in self._profiles:
                raise DataValidationError(f"duplicate profile id '{p.id}'")
            resolve_profile(p, freqs)
        for p in parsed:
            self._profiles[p.id] = p
        return parsed

    def save_to(self, directory) -> None:
        """Write one file per profile plus the index file."""
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        filenames = []
        for profile in self:
            stem = _SAFE_FILENAME.sub("_", profile.id)
            filename = f"{stem}.profile"
            (path / filename).write_text(format_profile(profile), encoding="utf-8")
            filenames.append(filename)
        (path / INDEX_FILENAME).write_text("\n".join(filenames) + "\n", encoding="utf-8")


def open_store(directory) -> ProfileStore:
    """Load a store from a directory with an index file."""
    path = Path(directory)
    index = path / INDEX_FILENAME
    if not index.is_file():
        raise DataValidationError(f"no store index at '{index}'")
    store = ProfileStore()
    for line in index.read_text(encoding="utf-8").splitlines():
        filename = line.strip()
        if not filename:
            continue
        file_path = path / filename
        if not file_path.is_file():
            raise DataValidationError(f"store index names missing file '{filename}'")
        for profile in parse_profiles(file_path.read_text(encoding="utf-8")):
            store.add(profile)
    return store


def import_profiles(
    store: ProfileStore, text: str, freqs: Mapping[str, AlleleVector]
) -> list[Profile]:
    """Import profiles from text into a store; see ProfileStore.import_text."""
    return store.import_text(text, freqs)


def load_profiles_file(path) -> list[Profile]:
    """Parse every profile in one file."""
    return parse_profiles(Path(path).read_text(encoding="utf-8"))
