"""Command-line interface: encode, lr, relative and search subcommands.

Every subcommand needs a frequency table, given with ``--freqs`` or the
``GPM_FREQS`` environment variable. Numbers are printed with 6 significant
digits in table mode and full precision in csv mode. Exit codes: 0
success, 1 usage error, 2 data or validation error, 3 undefined
likelihood ratio.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

from .core import GPM, AlleleVector, extend_frequencies, read_frequencies
from .errors import GpmError, UndefinedLikelihoodError
from .likelihood import MultiLocusLR, multi_locus_lr
from .notation import ContributorEncoding, assemble_single, assemble_two_contributors
from .relatives import MutationModel, RelationshipKind, RelationshipSpec, parse_relationship, rel_transform
from .search import SearchQuery, search
from .store import Profile, load_profiles_file, open_store, profile_alleles, resolve_profile

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_UNDEFINED = 3

FREQS_ENV_VAR = "GPM_FREQS"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems by default; this tool reserves 2
    # for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--freqs", help=f"frequency table path (or set ${FREQS_ENV_VAR})")
    sub.add_argument("--format", choices=("table", "csv"), default="table", help="output format")
    sub.add_argument(
        "--rare-allele-floor",
        type=float,
        default=None,
        metavar="FREQ",
        help="treat profile alleles missing from the table as present at this "
        "frequency instead of erroring",
    )


def _add_mutation(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--mut-rate", type=float, default=None, help="per-meiosis mutation rate")
    sub.add_argument(
        "--mut-up", type=float, default=0.5, help="fraction of mutations that step up (default 0.5)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gpm", description="Genotype probability matrix toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    encode = commands.add_parser("encode", parents=[], help="resolve designations into a GPM")
    _add_common(encode)
    encode.add_argument("--locus", required=True, help="locus name from the frequency table")
    encode.add_argument(
        "--vec", action="append", required=True, metavar="DESIGNATION",
        help="allele-vector designation; give 2 for one contributor, 4 for two",
    )
    encode.add_argument(
        "--tag", action="append", choices=("major", "minor", "either"),
        help="contributor tag per vector (repeat to match --vec)",
    )
    encode.set_defaults(func=cmd_encode)

    lr = commands.add_parser("lr", help="likelihood ratio between two profiles")
    _add_common(lr)
    lr.add_argument("profile1", help="profile file (the conditioning profile when theta > 0)")
    lr.add_argument("profile2", help="profile file")
    lr.add_argument("--relationship", default="same", help="hypothesis (default: same)")
    lr.add_argument("--theta", type=float, default=0.0, help="coancestry F_ST (default 0)")
    _add_mutation(lr)
    lr.set_defaults(func=cmd_lr)

    relative = commands.add_parser("relative", help="GPM of a relative of a profile")
    _add_common(relative)
    relative.add_argument("profile", help="profile file")
    relative.add_argument("--relationship", required=True, help="relationship name")
    _add_mutation(relative)
    relative.set_defaults(func=cmd_relative)

    srch = commands.add_parser("search", help="rank a store against a query profile")
    _add_common(srch)
    srch.add_argument("query", help="query profile file, or a profile id from the store")
    srch.add_argument("--store", required=True, help="store directory (with index.txt)")
    srch.add_argument(
        "--hypothesis", action="append", metavar="NAME",
        help="relationship hypothesis; repeatable or comma separated (default: same)",
    )
    srch.add_argument("--theta", type=float, default=0.0, help="coancestry F_ST (default 0)")
    srch.add_argument("--top", type=int, default=10, help="report at most this many candidates")
    srch.add_argument("--min-lr", type=float, default=0.0, help="drop candidates below this ratio")
    srch.add_argument("--workers", type=int, default=1, help="scan worker count")
    _add_mutation(srch)
    srch.set_defaults(func=cmd_search)
    return parser


def _fmt(value: float, fmt: str) -> str:
    if value != value or math.isinf(value):
        return str(value)
    return format(value, ".6g") if fmt == "table" else repr(float(value))


def _load_freqs(args) -> dict[str, AlleleVector]:
    path = args.freqs or os.environ.get(FREQS_ENV_VAR)
    if not path:
        raise _UsageError(f"--freqs is required (or set ${FREQS_ENV_VAR})")
    return read_frequencies(path)


def _floor_freqs(args, freqs, profiles: list[Profile]) -> dict[str, AlleleVector]:
    if args.rare_allele_floor is None:
        return freqs
    needed: dict[str, set[str]] = {}
    for p in profiles:
        for name, labels in profile_alleles(p).items():
            if name in freqs:
                needed.setdefault(name, set()).update(labels)
    return extend_frequencies(freqs, needed, args.rare_allele_floor)


def _load_single_profile(path: str) -> Profile:
    profiles = load_profiles_file(path)
    if len(profiles) != 1:
        raise GpmError(f"'{path}' holds {len(profiles)} profiles; expected exactly one")
    return profiles[0]


def _mutation_model(args, spec: RelationshipSpec | None = None) -> MutationModel | None:
    if args.mut_rate is None:
        return None
    if spec is not None and spec.kind is RelationshipKind.SIBLING:
        raise GpmError("the sibling transform has no mutation variant; drop --mut-rate")
    return MutationModel(args.mut_rate, args.mut_up)


def _print_gpm_table(out, G: GPM, indent: str = "  ") -> None:
    labels = G.locus.alleles
    width = max(10, max(len(lab) for lab in labels) + 2)
    out.write(indent + " " * width + "".join(f"{lab:>{width}}" for lab in labels) + "\n")
    for i, lab in enumerate(labels):
        cells = "".join(f"{_fmt(float(G.entries[i, j]), 'table'):>{width}}" for j in range(G.locus.k))
        out.write(f"{indent}{lab:<{width}}{cells}\n")


def _gpm_csv_rows(section: str, G: GPM):
    for i in range(G.locus.k):
        for j in range(G.locus.k):
            yield [section, G.locus.name, "", G.locus.alleles[i], G.locus.alleles[j],
                   repr(float(G.entries[i, j]))]


def cmd_encode(args, out) -> int:
    freqs = _load_freqs(args)
    if args.rare_allele_floor is not None:
        from .notation import designation_alleles

        labels = {args.locus: set()}
        for text in args.vec:
            labels[args.locus].update(designation_alleles(text))
        freqs = extend_frequencies(freqs, labels, args.rare_allele_floor)
    if args.locus not in freqs:
        raise GpmError(f"locus '{args.locus}' is not in the frequency table")
    b = freqs[args.locus]
    if len(args.vec) not in (2, 4):
        raise _UsageError(f"--vec must be given 2 or 4 times, got {len(args.vec)}")
    tags = args.tag
    if tags is not None and len(tags) != len(args.vec):
        raise _UsageError(f"{len(args.vec)} vectors but {len(tags)} tags")
    enc = ContributorEncoding.from_strings(args.vec, b, tags)
    if enc.n_contributors == 1:
        gpms = [("gpm", assemble_single(enc.designations[0].resolved, enc.designations[1].resolved))]
    else:
        major, minor = assemble_two_contributors(enc)
        gpms = [("major", major), ("minor", minor)]

    if args.format == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["record", "locus", "name", "allele_i", "allele_j", "value"])
        for n, d in enumerate(enc.designations, start=1):
            for lab, p in zip(b.locus.alleles, d.resolved.probs):
                writer.writerow(["vector", args.locus, str(n), lab, "", repr(float(p))])
        for section, G in gpms:
            writer.writerows(_gpm_csv_rows(section, G))
    else:
        out.write(f"locus: {args.locus}\n")
        for n, d in enumerate(enc.designations, start=1):
            parts = [
                f"{lab}={_fmt(float(p), 'table')}"
                for lab, p in zip(b.locus.alleles, d.resolved.probs)
                if p > 0
            ]
            out.write(f"vector {n} '{d.raw}' [{enc.tags[n - 1].value}]: {', '.join(parts)}\n")
        for section, G in gpms:
            out.write(f"{section}:\n")
            _print_gpm_table(out, G)
    return EXIT_OK


def _print_multi_lr(out, result: MultiLocusLR, fmt: str) -> None:
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["locus", "lr", "log10", "numerator", "denominator"])
        for loc in result.per_locus:
            writer.writerow(
                [loc.locus, repr(loc.lr), repr(loc.log10), repr(loc.numerator), repr(loc.denominator)]
            )
        writer.writerow(
            ["OVERALL", repr(result.overall), repr(result.log10_overall), "", ""]
        )
    else:
        header = f"{'locus':<12}{'lr':>14}{'log10':>14}{'numerator':>14}{'denominator':>14}"
        out.write(header + "\n")
        for loc in result.per_locus:
            out.write(
                f"{loc.locus:<12}{_fmt(loc.lr, fmt):>14}{_fmt(loc.log10, fmt):>14}"
                f"{_fmt(loc.numerator, fmt):>14}{_fmt(loc.denominator, fmt):>14}\n"
            )
        out.write(
            f"{'OVERALL':<12}{_fmt(result.overall, fmt):>14}{_fmt(result.log10_overall, fmt):>14}\n"
        )
    if result.skipped:
        print(f"skipped loci: {', '.join(result.skipped)}", file=sys.stderr)


def cmd_lr(args, out) -> int:
    p1 = _load_single_profile(args.profile1)
    p2 = _load_single_profile(args.profile2)
    freqs = _floor_freqs(args, _load_freqs(args), [p1, p2])
    spec = parse_relationship(args.relationship)
    model = _mutation_model(args, spec)
    result = multi_locus_lr(
        resolve_profile(p1, freqs),
        resolve_profile(p2, freqs),
        spec,
        freqs,
        theta=args.theta,
        mutation_model=model,
    )
    _print_multi_lr(out, result, args.format)
    return EXIT_OK


def cmd_relative(args, out) -> int:
    profile = _load_single_profile(args.profile)
    freqs = _floor_freqs(args, _load_freqs(args), [profile])
    spec = parse_relationship(args.relationship)
    model = _mutation_model(args, spec)
    gpms = resolve_profile(profile, freqs)
    writer = None
    if args.format == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["record", "locus", "name", "allele_i", "allele_j", "value"])
    for name in freqs:
        if name not in gpms:
            continue
        b = freqs[name]
        locus_spec = spec
        if model is not None and spec.kind is RelationshipKind.DEGREE:
            locus_spec = spec.with_mutation(model.matrix_for(b.locus))
        relative = rel_transform(gpms[name], locus_spec, b)
        if writer is not None:
            writer.writerows(_gpm_csv_rows("relative", relative))
        else:
            out.write(f"locus {name} ({spec.label} of '{profile.id}'):\n")
            _print_gpm_table(out, relative)
    return EXIT_OK


def cmd_search(args, out) -> int:
    from pathlib import Path

    db = open_store(args.store)
    if Path(args.query).is_file():
        query_profile: Profile | str = _load_single_profile(args.query)
        query_id = query_profile.id
        scan_profiles = [query_profile, *db]
    elif args.query in db:
        query_profile = args.query
        query_id = args.query
        scan_profiles = list(db)
    else:
        raise GpmError(f"query '{args.query}' is neither a file nor a stored profile id")
    freqs = _floor_freqs(args, _load_freqs(args), scan_profiles)
    names = []
    for chunk in args.hypothesis or ["same"]:
        names.extend(part for part in chunk.split(",") if part)
    hypotheses = tuple(parse_relationship(n) for n in names)
    model = _mutation_model(args)
    query = SearchQuery(
        profile=query_profile,
        hypotheses=hypotheses,
        theta=args.theta,
        min_lr=args.min_lr,
        top_k=args.top,
        mutation=model,
    )
    report = search(query, db, freqs, workers=args.workers)

    labels = [spec.label for spec in hypotheses]
    if args.format == "csv":
        writer = csv.writer(out, lineterminator="\n")
        header = ["rank", "candidate", "best_hypothesis", "best_lr", "best_log10", "shared_loci"]
        for label in labels:
            header += [f"lr_{label}", f"log10_{label}"]
        writer.writerow(header)
        for rank, res in enumerate(report.results, start=1):
            row = [str(rank), res.candidate_id, res.best_hypothesis, repr(res.best_lr),
                   repr(res.best_log10), str(res.shared_loci)]
            for label in labels:
                mll = res.per_hypothesis[label]
                row += ["", ""] if mll is None else [repr(mll.overall), repr(mll.log10_overall)]
            writer.writerow(row)
    else:
        cols = [f"{'rank':<6}{'candidate':<20}{'best':<10}{'lr':>14}{'log10':>12}{'shared':>8}"]
        cols += [f"{'lr[' + label + ']':>16}" for label in labels]
        out.write("".join(cols) + "\n")
        for rank, res in enumerate(report.results, start=1):
            line = (
                f"{rank:<6}{res.candidate_id:<20}{res.best_hypothesis:<10}"
                f"{_fmt(res.best_lr, 'table'):>14}{_fmt(res.best_log10, 'table'):>12}"
                f"{res.shared_loci:>8}"
            )
            for label in labels:
                mll = res.per_hypothesis[label]
                line += f"{'undefined' if mll is None else _fmt(mll.overall, 'table'):>16}"
            out.write(line + "\n")
    if report.skipped:
        print(f"skipped (no shared loci): {', '.join(report.skipped)}", file=sys.stderr)
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    _ = query_id
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, sys.stdout)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UndefinedLikelihoodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except (GpmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
