"""Command-line orchestration of the pipeline.

Every subcommand writes its results to files under ``--out``; nothing
meaningful is only printed. Commands are deterministic given their
inputs (and, for ``synth``, the seed); on failure partial outputs are
removed and the exit status is nonzero with a one-line diagnostic.

A flat ``key=value`` config file can supply any long flag's value;
explicit flags win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import evaluation, naive_bayes as nb, synth, tree as dtree
from .codebook import load_codebook, parse_codebook, shipped_codebook_text
from .labeling import (
    FIVE_YEAR,
    LabelingConfig,
    label_dataset,
    read_labeled_csv,
    write_labeled_csv,
)
from .preprocess import (
    FOLLOWUP_END_YEAR,
    read_patients_csv,
    run_pipeline,
    write_patients_csv,
)
from .schema import load_records, parse_schema
from .codebook import shipped_schema_text
from .stats import (
    class_profile,
    detect_mst_discontinuity,
    frequency_profile,
    mst_by_year,
    render_class_profile,
    render_year_table,
)


class CommandError(Exception):
    """Raised for user-facing failures; message printed as the diagnostic."""


class OutputTracker:
    """Records written paths so a failing command can clean up after itself."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        p = self.out_dir / name
        self.written.append(p)
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="ascii") as fh:
            fh.write(text)
        return p

    def cleanup(self) -> None:
        for p in self.written:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


def _load_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="ascii") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CommandError(f"bad config line {lineno}: {line!r}")
                key, value = line.split("=", 1)
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise CommandError(f"cannot read config file: {exc}")
    return values


def _setting(args, config: dict[str, str], key: str, default=None, cast=str):
    cli_value = getattr(args, key.replace("-", "_"), None)
    if cli_value is not None:
        return cli_value
    if key in config:
        try:
            return cast(config[key])
        except ValueError:
            raise CommandError(f"config key {key} has bad value {config[key]!r}")
    return default


def _load_schema_arg(path: str | None):
    if path:
        try:
            with open(path, "r", encoding="ascii") as fh:
                return parse_schema(fh.read())
        except OSError as exc:
            raise CommandError(f"cannot read schema: {exc}")
    return parse_schema(shipped_schema_text())


def _load_codebook_arg(path: str | None):
    if path:
        try:
            return load_codebook(path)
        except OSError as exc:
            raise CommandError(f"cannot read codebook: {exc}")
    return parse_codebook(shipped_codebook_text())


def _parse_years(text: str) -> tuple[int, int]:
    try:
        first, last = text.split("-")
        return int(first), int(last)
    except ValueError:
        raise CommandError(f"bad year range {text!r}, expected FIRST-LAST")


def _parse_rule(text: str) -> synth.PlantedRule:
    # feature=value[:fidelity[:recall]]
    try:
        head, *rest = text.split(":")
        feature, value = head.split("=")
        fidelity = float(rest[0]) if len(rest) > 0 else 1.0
        recall = float(rest[1]) if len(rest) > 1 else 1.0
        return synth.PlantedRule(feature, value, fidelity, recall)
    except (ValueError, IndexError) as exc:
        raise CommandError(f"bad rule spec {text!r}: {exc}")


def _parse_experiment_spec(text: str) -> evaluation.ExperimentSpec:
    # name:first-last:target
    try:
        name, years, target = text.split(":")
        return evaluation.ExperimentSpec(name, _parse_years(years), int(target))
    except ValueError as exc:
        raise CommandError(f"bad experiment spec {text!r}: {exc}")


def _study_window_flag(value: str) -> bool:
    if value not in ("on", "off"):
        raise CommandError("--study-window must be 'on' or 'off'")
    return value == "on"


def _write_issue_log(out: OutputTracker, name: str, reports) -> None:
    lines = []
    for report in reports:
        for locator, field_name, code, detail in report.issues:
            if ":" in locator:
                file_part, line_part = locator.rsplit(":", 1)
            else:
                file_part, line_part = locator, "-"
            lines.append(f"{file_part}\t{line_part}\t{field_name}\t{code}\t{detail}")
    out.write_text(name, "\n".join(lines) + ("\n" if lines else ""))


def _write_phase_reports(out: OutputTracker, name: str, reports) -> None:
    lines = []
    for report in reports:
        lines.append(
            f"phase {report.phase}: in {report.records_in} out {report.records_out} "
            f"issues {len(report.issues)}"
        )
    out.write_text(name, "\n".join(lines) + "\n")


def cmd_synth(args, config) -> int:
    out = OutputTracker(Path(_setting(args, config, "out", ".")))
    try:
        seed = _setting(args, config, "seed", 0, int)
        n = _setting(args, config, "n", None, int)
        if n is None:
            raise CommandError("synth requires --n")
        years = _setting(args, config, "years", "1988-1999")
        if isinstance(years, str):
            years = _parse_years(years)
        rules = tuple(_parse_rule(r) for r in (args.rule or []))
        targets = None
        if args.mst_targets:
            targets = {}
            for pair in args.mst_targets.split(","):
                year, months = pair.split(":")
                targets[int(year)] = int(months)
        gen_config = synth.GeneratorConfig(
            seed=seed,
            n_records=n,
            year_range=years,
            survivor_fraction=_setting(args, config, "survivor-fraction", 0.0823, float),
            per_year_mst_targets=targets,
            planted_rules=rules,
            missing_rate=_setting(args, config, "missing-rate", 0.0, float),
            malformed_line_rate=_setting(args, config, "malformed-rate", 0.0, float),
        )
        lines, truth = synth.generate(gen_config)
        if gen_config.missing_rate > 0 or gen_config.malformed_line_rate > 0:
            schema = _load_schema_arg(args.schema)
            lines = synth.inject_noise(lines, gen_config, schema, truth)
        synth.write_lines(lines, out.path("synth.dat"))
        synth.write_manifest(truth, out.path("manifest.tsv"))
        if truth.defects:
            synth.write_defects(truth, out.path("defects.tsv"))
        print(f"wrote {len(lines)} records ({truth.survivor_count()} survivors)")
        return 0
    except (CommandError, ValueError) as exc:
        out.cleanup()
        raise CommandError(str(exc))


def _preprocess_to_patients(args, config):
    schema = _load_schema_arg(args.schema)
    codebook = _load_codebook_arg(args.codebook)
    inputs = args.inputs
    if not inputs:
        raise CommandError("no input files given (--in)")
    datasets = []
    parse_logs = []
    for path in inputs:
        try:
            records, log = load_records(path, schema)
        except OSError as exc:
            raise CommandError(f"cannot read input: {exc}")
        datasets.append(records)
        parse_logs.append((path, log))
    study_window = _study_window_flag(_setting(args, config, "study-window", "on"))
    followup = _setting(args, config, "followup-end", FOLLOWUP_END_YEAR, int)
    result = run_pipeline(
        [schema] * len(datasets),
        datasets,
        codebook,
        study_window=study_window,
        followup_end_year=followup,
    )
    return result, parse_logs


def cmd_preprocess(args, config) -> int:
    out = OutputTracker(Path(_setting(args, config, "out", ".")))
    try:
        result, parse_logs = _preprocess_to_patients(args, config)
        if result.verdict != "usable":
            raise CommandError("dataset discarded during relevancy checks (phase II)")
        write_patients_csv(result.patients, out.path("patients.csv"))
        _write_phase_reports(out, "phase_reports.txt", result.reports)
        _write_issue_log(out, "issues.log", result.reports)
        log_lines = [
            f"{path}: parsed {log.parsed} skipped {log.skipped}"
            for path, log in parse_logs
        ]
        out.write_text("parse_log.txt", "\n".join(log_lines) + "\n")
        print(f"kept {len(result.patients)} patient records")
        return 0
    except (CommandError, ValueError) as exc:
        out.cleanup()
        raise CommandError(str(exc))


def cmd_label(args, config) -> int:
    out = OutputTracker(Path(_setting(args, config, "out", ".")))
    try:
        patients = read_patients_csv(args.inputs[0]) if args.inputs else []
        if not args.inputs:
            raise CommandError("label requires --in patients.csv")
        cfg = LabelingConfig(
            short_term_threshold_months=_setting(args, config, "ts-months", 12, int),
            last_dataset_year=_setting(args, config, "last-year", 1999, int),
        )
        mode = _setting(args, config, "mode", FIVE_YEAR)
        labeled, stats = label_dataset(patients, cfg, mode)
        write_labeled_csv(labeled, out.path("labeled.csv"))
        lines = [
            f"mode\t{stats.mode}",
            f"total\t{stats.total}",
            f"labeled\t{stats.labeled}",
            f"removed\t{stats.removed}",
            f"positives\t{stats.positives}",
            f"positive_fraction\t{stats.positive_fraction():.6f}",
        ]
        for rule in sorted(stats.rule_counts):
            lines.append(f"rule_count.{rule}\t{stats.rule_counts[rule]}")
        out.write_text("labeling_stats.txt", "\n".join(lines) + "\n")
        print(f"labeled {stats.labeled} of {stats.total} ({stats.removed} removed)")
        return 0
    except (CommandError, ValueError) as exc:
        out.cleanup()
        raise CommandError(str(exc))


def cmd_stats(args, config) -> int:
    out = OutputTracker(Path(_setting(args, config, "out", ".")))
    try:
        fmt = _setting(args, config, "format", "text")
        wrote_any = False
        if args.patients:
            patients = read_patients_csv(args.patients)
            with_months = [p for p in patients if p.survival_time_months is not None]
            year_stats = mst_by_year(with_months)
            if fmt == "tsv":
                rows = ["year\tmedian_survival_months\tpatients"]
                rows += [
                    f"{s.year}\t{s.rounded_median()}\t{s.patient_count}"
                    for s in year_stats
                ]
                out.write_text("mst_by_year.tsv", "\n".join(rows) + "\n")
            else:
                out.write_text("mst_by_year.txt", render_year_table(year_stats))
            if len(year_stats) >= 2:
                drop = _setting(args, config, "drop-fraction", 0.25, float)
                flagged = detect_mst_discontinuity(year_stats, drop)
                out.write_text(
                    "mst_discontinuity.txt",
                    "flagged_years\t"
                    + (",".join(str(y) for y in sorted(flagged)) if flagged else "-")
                    + "\n",
                )
            fields = _setting(
                args, config, "fields", "radiation,surgery_site,primary_site"
            ).split(",")
            profile_lines = []
            for field_name in fields:
                profile = frequency_profile(patients, field_name.strip())
                for value in sorted(profile.counts):
                    profile_lines.append(
                        f"{profile.field_name}\t{value}\t{profile.counts[value]}"
                        f"\t{profile.fractions[value]:.6f}"
                    )
            out.write_text("frequency_profiles.tsv", "\n".join(profile_lines) + "\n")
            wrote_any = True
        if args.labeled:
            labeled = read_labeled_csv(args.labeled)
            profile = class_profile(labeled)
            if fmt == "tsv":
                rows = [
                    f"survived\t{profile.survived}\t{profile.survived_pct:.2f}",
                    f"not_survived\t{profile.not_survived}\t{profile.not_survived_pct:.2f}",
                    f"total\t{profile.total}\t100.00",
                ]
                out.write_text("class_profile.tsv", "\n".join(rows) + "\n")
            else:
                out.write_text("class_profile.txt", render_class_profile(profile))
            tumor = frequency_profile(labeled, "tumor_size_mm")
            if tumor.survivor_lt40_fraction is not None:
                out.write_text(
                    "tumor_survivors.txt",
                    f"survivor_tumor_lt40_fraction\t{tumor.survivor_lt40_fraction:.6f}\n",
                )
            wrote_any = True
        if not wrote_any:
            raise CommandError("stats requires --patients and/or --labeled")
        print("stats written")
        return 0
    except (CommandError, ValueError) as exc:
        out.cleanup()
        raise CommandError(str(exc))


def _tree_params(args, config) -> dtree.TreeParams:
    return dtree.TreeParams(
        min_leaf_instances=_setting(args, config, "min-leaf", 2, int),
        pruning_confidence=_setting(args, config, "confidence", 0.25, float),
    )


def cmd_train(args, config) -> int:
    out = OutputTracker(Path(_setting(args, config, "out", ".")))
    try:
        if not args.inputs:
            raise CommandError("train requires --in labeled.csv")
        labeled = read_labeled_csv(args.inputs[0])
        if args.years:
            first, last = _parse_years(args.years)
            labeled = [i for i in labeled if first <= i.diagnosis_year <= last]
        if not labeled:
            raise CommandError("no training instances after filtering")
        model_kind = _setting(args, config, "model", "nb")
        class_order = (False, True)
        if model_kind == "nb":
            alpha = _setting(args, config, "alpha", 1.0, float)
            model = nb.nb_train(labeled, alpha=alpha, class_order=class_order)
            nb.save_nb(model, out.path("nb.model"))
        elif model_kind == "tree":
            params = _tree_params(args, config)
            grown = dtree.build_tree(labeled, params, class_order=class_order)
            pruned = dtree.prune(grown, params.pruning_confidence)
            dtree.save_tree(pruned, out.path("tree.model"))
        else:
            raise CommandError(f"unknown model kind {model_kind!r}")
        print(f"trained {model_kind} on {len(labeled)} instances")
        return 0
    except (CommandError, ValueError) as exc:
        out.cleanup()
        raise CommandError(str(exc))


def cmd_evaluate(args, config) -> int:
    out = OutputTracker(Path(_setting(args, config, "out", ".")))
    try:
        if not args.inputs or not args.model:
            raise CommandError("evaluate requires --in labeled.csv and --model FILE")
        labeled = read_labeled_csv(args.inputs[0])
        if args.years:
            first, last = _parse_years(args.years)
            labeled = [i for i in labeled if first <= i.diagnosis_year <= last]
        if not labeled:
            raise CommandError("no evaluation instances after filtering")
        text = open(args.model, "r", encoding="ascii").read()
        if text.startswith("naive-bayes"):
            model = nb.parse_nb(text)
            name = evaluation.NAIVE_BAYES
            classify = lambda f: nb.nb_classify(model, f)
            predict = lambda f: nb.nb_predict(model, f)
            class_order = model.class_values
        elif text.startswith("c45-tree"):
            model = dtree.parse_tree(text)
            name = evaluation.DECISION_TREE
            classify = lambda f: dtree.tree_classify(model, f)
            predict = lambda f: dtree.tree_predict(model, f)
            class_order = model.class_values
        else:
            raise CommandError("unrecognized model file format")
        report = evaluation.evaluate_model(name, classify, predict, labeled, class_order)
        out.write_text("report.txt", evaluation.render_report(report))
        print(
            f"CCI {report.cci_count}/{report.total} ({report.cci_percent:.2f}%) "
            f"kappa {report.kappa:.5f}"
        )
        return 0
    except (CommandError, ValueError, OSError) as exc:
        out.cleanup()
        raise CommandError(str(exc))


def cmd_experiment(args, config) -> int:
    out = OutputTracker(Path(_setting(args, config, "out", ".")))
    try:
        result, _ = _preprocess_to_patients(args, config)
        if result.verdict != "usable":
            raise CommandError("dataset discarded during relevancy checks (phase II)")
        cfg = LabelingConfig(
            short_term_threshold_months=_setting(args, config, "ts-months", 12, int),
            last_dataset_year=_setting(args, config, "last-year", 1999, int),
        )
        mode = _setting(args, config, "mode", FIVE_YEAR)
        labeled, stats = label_dataset(result.patients, cfg, mode)
        write_labeled_csv(labeled, out.path("labeled.csv"))
        stats_lines = [
            f"mode\t{stats.mode}",
            f"total\t{stats.total}",
            f"labeled\t{stats.labeled}",
            f"removed\t{stats.removed}",
            f"positives\t{stats.positives}",
            f"positive_fraction\t{stats.positive_fraction():.6f}",
        ]
        for rule in sorted(stats.rule_counts):
            stats_lines.append(f"rule_count.{rule}\t{stats.rule_counts[rule]}")
        out.write_text("labeling_stats.txt", "\n".join(stats_lines) + "\n")

        specs = (
            [_parse_experiment_spec(s) for s in args.spec]
            if args.spec
            else list(evaluation.DEFAULT_EXPERIMENTS)
        )
        params = _tree_params(args, config)
        alpha = _setting(args, config, "alpha", 1.0, float)
        results = []
        for spec in specs:
            exp = evaluation.run_experiment(spec, labeled, params, alpha)
            results.append(exp)
            for cname, report in exp.reports.items():
                out.write_text(
                    f"{spec.identifier}_{cname}_report.txt",
                    evaluation.render_report(report, spec),
                )
            nb_model = exp.models.get(evaluation.NAIVE_BAYES)
            if nb_model is not None:
                nb.save_nb(nb_model, out.path(f"{spec.identifier}_nb.model"))
            tree_model = exp.models.get(evaluation.DECISION_TREE)
            if tree_model is not None:
                dtree.save_tree(tree_model, out.path(f"{spec.identifier}_tree.model"))
        out.write_text("table9.txt", evaluation.render_comparison(results))
        out.write_text(
            "metrics.tsv", "\n".join(evaluation.metrics_tsv_rows(results)) + "\n"
        )
        print(f"ran {len(results)} experiments over {stats.labeled} labeled instances")
        return 0
    except (CommandError, ValueError) as exc:
        out.cleanup()
        raise CommandError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lungsurv",
        description="Registry-style lung cohort mining pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, schema=False, inputs=False):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--out", help="output directory")
        if schema:
            p.add_argument("--schema", help="schema file (default: shipped layout)")
            p.add_argument("--codebook", help="code book file (default: shipped)")
        if inputs:
            p.add_argument("--in", dest="inputs", action="append", help="input file")

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    common(p, schema=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--years", help="diagnosis year range FIRST-LAST")
    p.add_argument("--survivor-fraction", type=float, dest="survivor_fraction")
    p.add_argument("--missing-rate", type=float, dest="missing_rate")
    p.add_argument("--malformed-rate", type=float, dest="malformed_rate")
    p.add_argument(
        "--rule",
        action="append",
        help="planted rule feature=value[:fidelity[:recall]] (repeatable)",
    )
    p.add_argument("--mst-targets", dest="mst_targets", help="year:months,... pairs")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="parse and preprocess raw files")
    common(p, schema=True, inputs=True)
    p.add_argument("--study-window", dest="study_window", help="on|off (default on)")
    p.add_argument("--followup-end", type=int, dest="followup_end")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("label", help="derive survivability labels")
    common(p, inputs=True)
    p.add_argument("--mode", choices=("five_year", "short_long"))
    p.add_argument("--ts-months", type=int, dest="ts_months")
    p.add_argument("--last-year", type=int, dest="last_year")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("stats", help="cohort statistics")
    common(p)
    p.add_argument("--patients", help="patients.csv from preprocess")
    p.add_argument("--labeled", help="labeled.csv from label")
    p.add_argument("--format", choices=("text", "tsv"))
    p.add_argument("--fields", help="comma-separated frequency-profile fields")
    p.add_argument("--drop-fraction", type=float, dest="drop_fraction")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a classifier on labeled data")
    common(p, inputs=True)
    p.add_argument("--model", choices=("nb", "tree"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--confidence", type=float)
    p.add_argument("--min-leaf", type=int, dest="min_leaf")
    p.add_argument("--years", help="restrict to diagnosis years FIRST-LAST")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a serialized model")
    common(p, inputs=True)
    p.add_argument("--model", help="model file from train")
    p.add_argument("--years", help="restrict to diagnosis years FIRST-LAST")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run the year-split experiment suite")
    common(p, schema=True, inputs=True)
    p.add_argument("--study-window", dest="study_window", help="on|off (default on)")
    p.add_argument("--followup-end", type=int, dest="followup_end")
    p.add_argument("--mode", choices=("five_year", "short_long"))
    p.add_argument("--ts-months", type=int, dest="ts_months")
    p.add_argument("--last-year", type=int, dest="last_year")
    p.add_argument("--alpha", type=float)
    p.add_argument("--confidence", type=float)
    p.add_argument("--min-leaf", type=int, dest="min_leaf")
    p.add_argument(
        "--spec",
        action="append",
        help="experiment spec name:FIRST-LAST:TARGET (repeatable)",
    )
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = _load_config_file(getattr(args, "config", None))
    try:
        return args.func(args, config)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
