import logging
import os
from contextlib import contextmanager
from typing import List, Optional

import typer
from rich.console import Console
from rich.table import Table
from typing_extensions import Annotated

from pytessindex import __description__
from pytessindex.constants import (
    DEFAULT_ARITY,
    DEFAULT_BENCH_THRESHOLD,
    DEFAULT_BITS,
    DEFAULT_DEPTH,
    DEFAULT_K,
    DEFAULT_KAPPA,
    DEFAULT_N_ITEMS,
    DEFAULT_N_USERS,
    DEFAULT_SEED,
    DEFAULT_TABLES,
    DEFAULT_THRESHOLD,
    EMBEDDINGS_FILE_NAME,
    INDEX_FILE_NAME,
    ITEMS_FILE_NAME,
    REPORT_FILE_PREFIX,
    TERNARY_BASE,
    USERS_FILE_NAME,
    YAML_FILE_CONFIG,
)
from pytessindex.encoding import (
    EncodingConfig,
    Scheme,
    encode_factors,
    read_embeddings,
    write_embeddings,
)
from pytessindex.evaluation import (
    BenchParams,
    Method,
    gen_synthetic,
    ground_truth,
    load_factors,
    read_factors,
    run_benchmark,
    save_factors,
    write_per_user_csv,
    write_report,
)
from pytessindex.exceptions import (
    TessConfigError,
    TessIndexException,
    TessInputError,
    YAMLConfigExists,
    YAMLGenericException,
    YAMLValidationError,
)
from pytessindex.helpers import is_verbose, set_verbose
from pytessindex.index import (
    QueryConfig,
    build_index,
    load_index,
    retrieve_candidates,
    save_index,
    score_topk,
)
from pytessindex.logger import get_logger
from pytessindex.version import package_summary, package_version
from pytessindex.yamlhandler import YAMLEmptyConfigHandler, YAMLHandler

app = typer.Typer(help=__description__)
console = Console()
err_console = Console(stderr=True)

VerboseOption = Annotated[Optional[bool], typer.Option(prompt=False, help="Verbose output")]
LogFileOption = Annotated[Optional[str], typer.Option(prompt=False, help="Additionally writes logs to this file")]
ConfigOption = Annotated[
    Optional[str], typer.Option(prompt=False, help=f"YAML configuration file (default: ./{YAML_FILE_CONFIG} if present)")
]
SchemeOption = Annotated[Optional[Scheme], typer.Option(prompt=False, help="Permutation scheme")]
BaseOption = Annotated[Optional[int], typer.Option(prompt=False, help="Tessellation levels D (1 is ternary)")]
ThresholdOption = Annotated[
    Optional[float], typer.Option(prompt=False, help="Coordinates with |z| below this are zeroed first")
]
ThreadsOption = Annotated[
    Optional[int], typer.Option(prompt=False, help="Worker threads (0: available parallelism)")
]


def __set_global_verbose(verbose: bool = False, log_file: Optional[str] = None) -> logging.Logger:
    set_verbose(bool(verbose))
    return get_logger(logging_level=logging.DEBUG if verbose else logging.INFO, log_file=log_file)


def __load_config(config: Optional[str]) -> YAMLHandler:
    """Loads the configuration file; returns an empty handler when there is none."""
    if config is None:
        if not os.path.exists(YAML_FILE_CONFIG):
            return YAMLHandler(filename=YAML_FILE_CONFIG)
        config = YAML_FILE_CONFIG
    elif not os.path.exists(config):
        raise typer.BadParameter(f"File not found: {config}", param_hint="'--config'")

    yml_handler = YAMLHandler(filename=config)
    try:
        yml_handler.load_data()
        yml_handler.verify_config()
    except (YAMLGenericException, YAMLValidationError) as ex:
        raise typer.BadParameter(f"Invalid configuration {config}: {ex}", param_hint="'--config'")
    return yml_handler


def __pick(value, yml_handler: YAMLHandler, section: str, key: str, default):
    if value is not None:
        return value
    return yml_handler.setting(section, key, default)


def __encoding_config(yml_handler, scheme, base, threshold, threshold_section="encoding", threshold_default=None):
    if threshold_default is None:
        threshold_default = DEFAULT_THRESHOLD
    return EncodingConfig(
        scheme=Scheme(__pick(scheme, yml_handler, "encoding", "scheme", Scheme.counter.value)),
        base=__pick(base, yml_handler, "encoding", "base", TERNARY_BASE),
        threshold=float(__pick(threshold, yml_handler, threshold_section, "threshold", threshold_default)),
    )


@contextmanager
def __handle_errors():
    """Configuration errors are usage errors (exit 2); failures while working exit 1."""
    try:
        yield
    except TessConfigError as ex:
        raise typer.BadParameter(str(ex))
    except (OSError, TessIndexException, YAMLGenericException, YAMLValidationError) as ex:
        err_console.print("Error: ", style="red", end=None)
        err_console.print(f"{ex}", style="yellow")
        if is_verbose():
            err_console.print_exception(show_locals=False)
        raise typer.Exit(code=1)


@app.command()
def gen(
    k: Annotated[int, typer.Option(prompt=False, help="Factor dimension")],
    n_users: Annotated[Optional[int], typer.Option(prompt=False, help="Number of users")] = None,
    n_items: Annotated[Optional[int], typer.Option(prompt=False, help="Number of items")] = None,
    seed: Annotated[Optional[int], typer.Option(prompt=False, help="Random seed")] = None,
    users: Annotated[Optional[str], typer.Option(prompt=False, help="Output CSV of user factors")] = USERS_FILE_NAME,
    items: Annotated[Optional[str], typer.Option(prompt=False, help="Output CSV of item factors")] = ITEMS_FILE_NAME,
    config: ConfigOption = None,
    verbose: VerboseOption = False,
    log_file: LogFileOption = None,
):
    """Generates synthetic standard normal user and item factors"""

    logger = __set_global_verbose(verbose, log_file)
    yml_handler = __load_config(config)

    with __handle_errors():
        factors = gen_synthetic(
            n_users=__pick(n_users, yml_handler, "bench", "n_users", DEFAULT_N_USERS),
            n_items=__pick(n_items, yml_handler, "bench", "n_items", DEFAULT_N_ITEMS),
            k=k,
            seed=__pick(seed, yml_handler, "bench", "seed", DEFAULT_SEED),
        )
        save_factors(users, factors.users)
        save_factors(items, factors.items)
        logger.debug(f"Wrote {len(factors.users)} users and {len(factors.items)} items")

    console.print("Generated factor files: ", end=None)
    console.print(f"{users}, {items}", style="green")


@app.command()
def embed(
    input: Annotated[str, typer.Option(prompt=False, help="Factor CSV file")],
    output: Annotated[Optional[str], typer.Option(prompt=False, help="Embedding file")] = EMBEDDINGS_FILE_NAME,
    scheme: SchemeOption = None,
    base: BaseOption = None,
    threshold: ThresholdOption = None,
    threads: ThreadsOption = None,
    config: ConfigOption = None,
    verbose: VerboseOption = False,
    log_file: LogFileOption = None,
):
    """Embeds factors into sparse vectors (threshold, tessellation, permutation)"""

    __set_global_verbose(verbose, log_file)
    yml_handler = __load_config(config)

    with __handle_errors():
        cfg = __encoding_config(yml_handler, scheme, base, threshold)
        factors = read_factors(input)
        embeddings = encode_factors(factors, cfg, threads=__pick(threads, yml_handler, "bench", "threads", 0))
        write_embeddings(output, embeddings)

    nonzeros = [len(embedding.nonzero_indices()) for embedding in embeddings]
    mean_nonzeros = sum(nonzeros) / len(nonzeros) if nonzeros else 0.0
    dim_p = embeddings[0].dim_p if embeddings else 0
    console.print(f"factors={len(embeddings)} p={dim_p} mean_nonzeros={mean_nonzeros:.3f}")
    console.print("Embeddings written to: ", end=None)
    console.print(f"{output}", style="green")


@app.command()
def index(
    items: Annotated[str, typer.Option(prompt=False, help="Item factor CSV file")],
    output: Annotated[Optional[str], typer.Option(prompt=False, help="Index snapshot file")] = INDEX_FILE_NAME,
    embeddings: Annotated[
        Optional[str], typer.Option(prompt=False, help="Item embedding file; computed from the factors if omitted")
    ] = None,
    scheme: SchemeOption = None,
    base: BaseOption = None,
    threshold: ThresholdOption = None,
    threads: ThreadsOption = None,
    config: ConfigOption = None,
    verbose: VerboseOption = False,
    log_file: LogFileOption = None,
):
    """Builds the inverted index over item embeddings and saves a snapshot"""

    logger = __set_global_verbose(verbose, log_file)
    yml_handler = __load_config(config)

    with __handle_errors():
        cfg = __encoding_config(yml_handler, scheme, base, threshold)
        factors = sorted(read_factors(items), key=lambda factor: factor.id)
        if embeddings is None:
            encoded = encode_factors(factors, cfg, threads=__pick(threads, yml_handler, "bench", "threads", 0))
        else:
            by_id = {embedding.id: embedding for embedding in read_embeddings(embeddings)}
            missing = [factor.id for factor in factors if factor.id not in by_id]
            if missing or len(by_id) != len(factors):
                raise TessInputError(f"embeddings do not match the item factors (missing ids: {missing[:5]})")
            encoded = [by_id[factor.id] for factor in factors]
        dim_p = cfg.dim_p(factors[0].k) if factors and embeddings is None else None
        idx = build_index(zip(factors, encoded), dim_p=dim_p)
        save_index(output, idx)
        logger.info(f"Indexed {idx.item_count} items into {len(idx.postings)} posting lists")

    console.print("Index snapshot written to: ", end=None)
    console.print(f"{output}", style="green")


@app.command()
def query(
    users: Annotated[str, typer.Option(prompt=False, help="User factor CSV file")],
    index: Annotated[Optional[str], typer.Option(prompt=False, help="Index snapshot file")] = INDEX_FILE_NAME,
    user_id: Annotated[Optional[List[int]], typer.Option(prompt=False, help="Only query these user ids")] = None,
    kappa: Annotated[Optional[int], typer.Option(prompt=False, help="Number of items to return")] = None,
    scheme: SchemeOption = None,
    base: BaseOption = None,
    threshold: ThresholdOption = None,
    config: ConfigOption = None,
    verbose: VerboseOption = False,
    log_file: LogFileOption = None,
):
    """Retrieves the top-kappa items of users from an index snapshot

    The encoding flags must match the ones the index was built with.
    """

    __set_global_verbose(verbose, log_file)
    yml_handler = __load_config(config)

    with __handle_errors():
        cfg = __encoding_config(yml_handler, scheme, base, threshold)
        query_cfg = QueryConfig(kappa=__pick(kappa, yml_handler, "query", "kappa", DEFAULT_KAPPA))
        idx = load_index(index)
        factors = sorted(read_factors(users), key=lambda factor: factor.id)
        if user_id:
            wanted = set(user_id)
            factors = [factor for factor in factors if factor.id in wanted]

        user_embeddings = encode_factors(factors, cfg, threads=1)
        for factor, embedding in zip(factors, user_embeddings):
            candidates = retrieve_candidates(idx, embedding)
            result = score_topk(factor, candidates, idx, query_cfg)
            typer.echo(f"user={factor.id} candidates={len(result.candidate_ids)} discard={result.discard_rate!r}")
            for id, score in result.topk:
                typer.echo(f"{id}\t{score!r}")


@app.command()
def bench(
    method: Annotated[
        Optional[List[Method]], typer.Option(prompt=False, help="Method to evaluate, may be repeated")
    ] = None,
    seed: Annotated[Optional[int], typer.Option(prompt=False, help="Random seed")] = None,
    n_users: Annotated[Optional[int], typer.Option(prompt=False, help="Number of synthetic users")] = None,
    n_items: Annotated[Optional[int], typer.Option(prompt=False, help="Number of synthetic items")] = None,
    k: Annotated[Optional[int], typer.Option(prompt=False, help="Synthetic factor dimension")] = None,
    users: Annotated[
        Optional[str], typer.Option(prompt=False, help="User factor CSV; replaces synthetic users")
    ] = None,
    items: Annotated[
        Optional[str], typer.Option(prompt=False, help="Item factor CSV; replaces synthetic items")
    ] = None,
    kappa: Annotated[Optional[int], typer.Option(prompt=False, help="Size of the true top set")] = None,
    scheme: SchemeOption = None,
    base: BaseOption = None,
    threshold: ThresholdOption = None,
    bits: Annotated[Optional[int], typer.Option(prompt=False, help="Code bits of srp and superbit")] = None,
    tables: Annotated[Optional[int], typer.Option(prompt=False, help="Boosting tables of the baselines")] = None,
    arity: Annotated[Optional[int], typer.Option(prompt=False, help="Projections of the concomitant code")] = None,
    depth: Annotated[Optional[int], typer.Option(prompt=False, help="Depth of the PCA-tree")] = None,
    threads: ThreadsOption = None,
    output_dir: Annotated[Optional[str], typer.Option(prompt=False, help="Directory of the report files")] = ".",
    config: ConfigOption = None,
    verbose: VerboseOption = False,
    log_file: LogFileOption = None,
):
    """Benchmarks recovery accuracy against discard rate and writes one report per method"""

    logger = __set_global_verbose(verbose, log_file)
    yml_handler = __load_config(config)

    if (users is None) != (items is None):
        raise typer.BadParameter("--users and --items must be given together", param_hint="'--users' / '--items'")
    methods = method or [Method(name) for name in yml_handler.setting("bench", "methods", [Method.tessindex.value])]

    with __handle_errors():
        params = BenchParams(
            kappa=__pick(kappa, yml_handler, "query", "kappa", DEFAULT_KAPPA),
            encoding=__encoding_config(yml_handler, scheme, base, threshold, "bench", DEFAULT_BENCH_THRESHOLD),
            bits=__pick(bits, yml_handler, "baselines", "bits", DEFAULT_BITS),
            tables=__pick(tables, yml_handler, "baselines", "tables", DEFAULT_TABLES),
            arity=__pick(arity, yml_handler, "baselines", "arity", DEFAULT_ARITY),
            depth=__pick(depth, yml_handler, "baselines", "depth", DEFAULT_DEPTH),
            seed=__pick(seed, yml_handler, "bench", "seed", DEFAULT_SEED),
            threads=__pick(threads, yml_handler, "bench", "threads", 0),
        )
        # baseline parameters are checked before any work starts
        for name in methods:
            if name is not Method.tessindex:
                params.hash_scheme(name)

        if users is not None:
            factors = load_factors(users, items)
        else:
            factors = gen_synthetic(
                n_users=__pick(n_users, yml_handler, "bench", "n_users", DEFAULT_N_USERS),
                n_items=__pick(n_items, yml_handler, "bench", "n_items", DEFAULT_N_ITEMS),
                k=__pick(k, yml_handler, "bench", "k", DEFAULT_K),
                seed=params.seed,
            )
        if Method.pca_tree in methods and params.depth > factors.k:
            raise TessConfigError(f"PCA-tree depth must lie in [0, {factors.k}], got {params.depth}")
        truth = ground_truth(factors, params.kappa)

        os.makedirs(output_dir, exist_ok=True)
        for name in dict.fromkeys(methods):
            report = run_benchmark(factors, name, params, truth=truth)
            report_path = os.path.join(output_dir, f"{REPORT_FILE_PREFIX}-{name.value}.txt")
            csv_path = os.path.join(output_dir, f"{REPORT_FILE_PREFIX}-{name.value}.csv")
            write_report(report_path, report)
            write_per_user_csv(csv_path, report)
            logger.debug(f"Wrote {report_path} and {csv_path}")

            console.print(f"{name.value}: ", style="cyan", end=None)
            console.print(
                f"mean discard {report.mean_discard:.4f}, mean recovery accuracy {report.mean_accuracy:.4f}, "
                f"mean speed-up {report.mean_speedup:.2f}"
            )
            console.print("Report written to: ", end=None)
            console.print(f"{report_path}", style="green")


@app.command()
def verify(
    filename: Annotated[
        Optional[str],
        typer.Option(prompt=False, help="Path to the YAML configuration file"),
    ] = YAML_FILE_CONFIG,
    verbose: Annotated[
        Optional[bool],
        typer.Option(prompt=False, help="Verbose options for exceptions"),
    ] = False,
):
    """Verify a given YAML configuration file"""

    __set_global_verbose(verbose)

    yml_handler = YAMLHandler(filename=filename)
    with __handle_errors():
        yml_handler.load_data()

    try:
        yml_handler.verify_config()
    except YAMLValidationError as ex:
        console.print("Invalid YAML file: ", end=None)
        console.print(f"{filename}", style="yellow")
        console.print("YAML errors: ", end=None)
        console.print(f"{ex}", style="red")
        if is_verbose():
            console.print_exception(show_locals=True)
        raise typer.Exit(code=1)

    console.print("Valid YAML file: ", end=None)
    console.print(f"{filename}", style="green")
    if is_verbose():
        yml_handler.to_console()


@app.command()
def init(
    filename: Annotated[
        Optional[str],
        typer.Option(prompt=False, help="Path to the YAML configuration file to create"),
    ] = YAML_FILE_CONFIG,
    verbose: Annotated[
        Optional[bool],
        typer.Option(prompt=False, help="Verbose options for exceptions"),
    ] = False,
):
    """Generates the initial YAML configuration file with every default"""

    yml_handler = YAMLEmptyConfigHandler()

    try:
        yml_handler.generate_empty_config(filename=filename)
        console.print("Generated config file: ", end=None)
        console.print(f"{filename}", style="green")
    except YAMLConfigExists as ex:
        console.print("Config file already exists: ", style="red", end=None)
        console.print(f"{filename}", style="yellow")
        if not verbose:
            console.print("Exception: ", end=None)
            console.print(f"{ex}", style="red")
        else:
            console.print_exception(show_locals=True)
        raise typer.Exit(code=1)


@app.command()
def version(
    verbose: Annotated[
        Optional[bool],
        typer.Option(prompt=False, help="Verbose options for exceptions"),
    ] = False,
):
    """Shows package version"""

    if not verbose:
        console.print("Version: ", style="white", end=None)
        console.print(f"{package_version()}", style="yellow")
    else:
        table = Table()
        table.add_column("Field", justify="right", style="cyan", no_wrap=True)
        table.add_column("Value", justify="left", style="yellow", no_wrap=True)
        summary = package_summary()
        for item in summary:
            table.add_row(item["field"], str(item["value"]))
        console.print(table)


if __name__ == "__main__":
    app()
