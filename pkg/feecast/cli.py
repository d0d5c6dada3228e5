from dotenv import load_dotenv

load_dotenv()

import argparse  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import signal  # noqa: E402
import sys  # noqa: E402
import threading  # noqa: E402
from pathlib import Path  # noqa: E402
from typing import List, Optional  # noqa: E402

import pandas as pd  # noqa: E402

from .config import PipelineConfig, load_config  # noqa: E402
from .dataset import Dataset, describe, load_dataset, save_dataset, validate  # noqa: E402
from .errors import UsageError, UserError  # noqa: E402
from .evaluation import (  # noqa: E402
    BacktestRunner,
    comparison_table,
    correlation_matrix,
    top_correlations,
    write_comparison,
)
from .models import MODEL_NAMES, get_forecaster  # noqa: E402
from .plots import heatmap, line_plot, write_svg  # noqa: E402
from .prep import dedup, fill_missing, preprocess  # noqa: E402

logger = logging.getLogger("feecast")


class FeecastArgumentParser(argparse.ArgumentParser):
    """Argument errors raise UsageError instead of exiting with argparse's status 2."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", type=str, default=None, help="TOML pipeline config")
    parser.add_argument("--seed", type=int, default=None, help="Override the config seed")
    parser.add_argument("--debug", "-d", action="store_true", help="Enable debug mode")


def build_parser() -> argparse.ArgumentParser:
    parser = FeecastArgumentParser(prog="feecast", description="Bitcoin block fee-rate forecasting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="Poll a Bitcoin Core node and append one record per block")
    _add_common(p)
    p.add_argument("--out", required=True, help="Dataset CSV to append to")
    p.add_argument("--blocks", type=int, default=None, help="Stop after N records (default: run until signal)")

    p = sub.add_parser("preprocess", help="De-duplicate, fill and clip a dataset")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    for name, help_text in (
        ("backtest", "Expanding-window cross-validation"),
        ("test", "Hold-out test on the final rows"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--model", "-m", required=True, choices=MODEL_NAMES)
        p.add_argument("--report", required=True, help="Report directory")

    p = sub.add_parser("forecast", help="Fit on all rows and forecast the next blocks")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--model", "-m", required=True, choices=MODEL_NAMES)
    p.add_argument("--horizon", type=int, default=144)
    p.add_argument("--out", required=True)
    p.add_argument("--save-model", default=None, help="Write the fitted model as JSON")

    p = sub.add_parser("correlations", help="Pearson correlation matrix and heatmap")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="Heatmap SVG path")
    p.add_argument("--matrix", default=None, help="Matrix CSV path (default: next to the SVG)")
    p.add_argument("--top", type=int, default=10, help="Strongest pairs to print")

    p = sub.add_parser("compare", help="Rank several models on CV and hold-out test")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--models", default=",".join(MODEL_NAMES), help="Comma-separated model names")
    p.add_argument("--report", required=True)

    p = sub.add_parser("synth", help="Write a synthetic dataset")
    _add_common(p)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--out", required=True)
    return parser


def _configure_logging(debug: bool) -> None:
    if debug:
        logging.basicConfig(
            level=logging.DEBUG,
            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%H:%M:%S",
        )
    else:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")


def _load_config(args) -> PipelineConfig:
    cfg, _ = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.model_copy(
            update={
                "seed": args.seed,
                "sarimax": cfg.sarimax.model_copy(update={"seed": args.seed}),
                "t2v": cfg.t2v.model_copy(update={"seed": args.seed}),
            }
        )
    return cfg


def _progress() -> bool:
    return sys.stderr.isatty()


def _load_clean(path: str) -> Dataset:
    """Dataset ready for fold-wise evaluation: deduplicated and gap-filled, not clipped."""
    return fill_missing(dedup(load_dataset(path)))


def cmd_fetch(args, cfg: PipelineConfig) -> None:
    from .ingest import BitcoinRPC, CsvSink, poll_loop

    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    sink = CsvSink(args.out)
    n = poll_loop(BitcoinRPC(cfg.ingest.rpc), cfg.ingest, sink, cfg.features, args.blocks, sleep=stop.wait, stop=stop)
    logger.info(f"Appended {n} records to {args.out}")


def cmd_preprocess(args, cfg: PipelineConfig) -> None:
    d = load_dataset(args.input)
    report = validate(d)
    if not report.ok:
        logger.warning(f"{len(report)} invariant violations in input ({', '.join(sorted(report.rules()))})")
    out = preprocess(d, cfg.prep)
    logger.info(f"Column summary:\n{describe(out).to_string(float_format=lambda x: f'{x:.4g}')}")
    save_dataset(out, args.out)
    logger.info(f"Wrote {len(out)} rows to {args.out}")


def _plot_results(runner: BacktestRunner, mode: str) -> None:
    frames = []
    for r in runner.results:
        suffix = f"fold{r.fold.index}" if mode == "cv" else "test"
        title = f"{runner.model_name} {suffix}: rows {r.fold.train_end}-{r.fold.test_end - 1}"
        svg = line_plot(r.actual, r.predicted, title, start=r.fold.train_end)
        write_svg(svg, f"{runner.model_name}_{suffix}.svg", runner.output_dir)
        frames.append(
            pd.DataFrame(
                {
                    "fold": r.fold.index,
                    "row": range(r.fold.train_end, r.fold.test_end),
                    "actual": r.actual,
                    "predicted": r.predicted,
                }
            )
        )
    pd.concat(frames).to_csv(
        runner.output_dir / f"{runner.model_name}_{mode}_predictions.csv", index=False, float_format="%.10g"
    )


def _evaluate(model: str, d: Dataset, cfg: PipelineConfig, report_dir: str, mode: str):
    runner = BacktestRunner(model, cfg, report_dir, progress=_progress())
    try:
        report = runner.run_cv(d) if mode == "cv" else runner.run_test(d)
        _plot_results(runner, mode)
        return report
    finally:
        runner.close()


def cmd_backtest(args, cfg: PipelineConfig) -> None:
    _evaluate(args.model, _load_clean(args.input), cfg, args.report, "cv")


def cmd_test(args, cfg: PipelineConfig) -> None:
    _evaluate(args.model, _load_clean(args.input), cfg, args.report, "test")


def cmd_forecast(args, cfg: PipelineConfig) -> None:
    d = preprocess(load_dataset(args.input), cfg.prep)
    model = get_forecaster(args.model, cfg).fit(d)
    forecast = model.forecast(args.horizon)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    forecast.to_frame().to_csv(args.out, index=False, float_format="%.10g")
    logger.info(f"Wrote {len(forecast)} {args.model} predictions to {args.out}")
    if args.save_model:
        Path(args.save_model).write_text(json.dumps(model.to_dict()) + "\n", encoding="utf-8")
        logger.info(f"Saved fitted model to {args.save_model}")


def cmd_correlations(args, cfg: PipelineConfig) -> None:
    m = correlation_matrix(load_dataset(args.input))
    out = write_svg(heatmap(m.r, m.columns), args.out)
    matrix_path = Path(args.matrix) if args.matrix else out.with_name("matrix.csv")
    m.to_frame().to_csv(matrix_path, float_format="%.10g")
    logger.info("Strongest correlations:")
    for a, b, r in top_correlations(m, args.top):
        logger.info(f"  {a:>22} ~ {b:<22} r = {r:+.3f}")


def cmd_compare(args, cfg: PipelineConfig) -> None:
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    unknown = [m for m in models if m not in MODEL_NAMES]
    if unknown:
        raise UserError(f"unknown model(s): {', '.join(unknown)}")
    d = _load_clean(args.input)
    cv, test = {}, {}
    for name in models:
        cv[name] = _evaluate(name, d, cfg, str(Path(args.report) / name / "cv"), "cv")
        test[name] = _evaluate(name, d, cfg, str(Path(args.report) / name / "test"), "test")
    table = comparison_table(cv, test)
    write_comparison(table, args.report)
    logger.info(f"Model ranking (by CV MAE):\n{table.to_string(index=False, float_format=lambda x: f'{x:.4f}')}")


def cmd_synth(args, cfg: PipelineConfig) -> None:
    from .synthetic import synth_dataset

    d = synth_dataset(args.rows, seed=cfg.seed, spec=cfg.features, progress=_progress())
    save_dataset(d, args.out)
    logger.info(f"Wrote {len(d)} synthetic rows to {args.out}")


COMMANDS = {
    "fetch": cmd_fetch,
    "preprocess": cmd_preprocess,
    "backtest": cmd_backtest,
    "test": cmd_test,
    "forecast": cmd_forecast,
    "correlations": cmd_correlations,
    "compare": cmd_compare,
    "synth": cmd_synth,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args.debug)
        cfg = _load_config(args)
        COMMANDS[args.command](args, cfg)
    except UserError as e:
        print(f"ERROR: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.debug("Unhandled failure", exc_info=True)
        print(f"ERROR: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
