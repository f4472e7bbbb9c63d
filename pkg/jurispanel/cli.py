import argparse
import logging
import os
import sys

from . import util
from .alignment import build_alignment_data
from .config import apply_overrides, load_config
from .demo import run_closed_loop, write_demo
from .embedding import EmbeddingProviderConfig, make_embedder
from .evolution import maybe_trigger
from .exceptions import JurisPanelError, LockError
from .metrics import Prediction, evaluate, format_report, write_report
from .prompts import PANEL_ROLES, AgentRole
from .runner import Session, run_inference, seed_everything
from .statutes import load_statutes
from .trace import replay_trace
from .verdict import Verdict, get_term_bins, load_corpus

logger = logging.getLogger(__name__)


def _load(args, roles):
    config = apply_overrides(load_config(args.config), no_memory=getattr(args, 'no_memory', False),
                             seed=getattr(args, 'seed', None), concurrency=getattr(args, 'concurrency', None),
                             epochs=getattr(args, 'epochs', None))
    return config.validate(check_paths=True, roles=roles)


def cmd_infer(args):
    config = _load(args, roles=PANEL_ROLES)
    if config.archive_enabled and config.evolve_enabled:
        config.validate(roles=PANEL_ROLES + (AgentRole.META,))
    summary = run_inference(config)
    for epoch in summary.epochs:
        print('Epoch {}: {} judged, {} skipped, {} archived, {} buffered, {} evolution cycles'.format(
            epoch.epoch, epoch.processed, len(epoch.skipped), epoch.archived, epoch.buffered, len(epoch.cycles)))
        if epoch.report is not None:
            print(format_report(epoch.report))
    return 0 if summary.ok else 1


def cmd_evolve(args):
    config = _load(args, roles=(AgentRole.META,))
    seed_everything(config.seed)
    if not os.path.isdir(config.paths.memory_dir):
        print('Memory directory not found: {}'.format(config.paths.memory_dir))
        return 1
    try:
        with util.memory_lock(config.paths.memory_dir):
            session = Session(config)
            if not args.force and not maybe_trigger(session.archive, config.evolution):
                print('Fewer than {} nodes archived since the last cycle; use --force to evolve anyway'.format(
                    config.evolution.batch_threshold))
                return 0
            report = session.evolve()
            session.save_memory()
            if args.plot:
                from .plot import plot_directive_confidence
                plot_directive_confidence(session.base, file_name=args.plot, show=False)
    except LockError as e:
        print(e)
        return 1
    print(report)
    return 0 if not report.errors else 1


def cmd_build_alignment_data(args):
    config = _load(args, roles=('teacher', AgentRole.REFLECTOR, 'expert'))
    seed_everything(config.seed)
    session = Session(config)
    output_dir = args.output or os.path.join(config.paths.output_dir, 'alignment')
    summary = build_alignment_data(load_corpus(config.paths.corpus), session.backends['teacher'],
                                   session.backends[AgentRole.REFLECTOR], session.backends['expert'],
                                   session.library, output_dir, max_iters=config.max_reflections,
                                   k=config.panel.coarse_k, prompts=session.prompts)
    print(summary)
    return 0


def _read_predictions(file_name):
    predictions = {}
    for line_number, d in util.read_jsonl(file_name):
        try:
            verdict = Verdict.from_dict(d['verdict'])
            predictions[str(d['id'])] = Prediction(verdict=verdict,
                                                   ranked_articles=tuple(d.get('ranked_articles') or verdict.articles),
                                                   ranked_charges=tuple(d.get('ranked_charges') or verdict.charges))
        except (KeyError, TypeError, ValueError) as e:
            raise JurisPanelError('{}, line {}: invalid prediction ({})'.format(file_name, line_number, e))
    return predictions


def cmd_evaluate(args):
    predictions = _read_predictions(args.predictions)
    results, skipped = [], 0
    for case in load_corpus(args.corpus):
        if case.gold is None:
            continue
        if case.id in predictions:
            results.append((predictions[case.id], case.gold))
        else:
            skipped += 1
    report = evaluate(results, get_term_bins(args.term_bins), args.average_over, args.acc_mode, skipped=skipped)
    print(format_report(report))
    if args.output:
        write_report(args.output, report)
    if args.plot:
        from .plot import plot_metrics
        plot_metrics({os.path.basename(args.predictions): report}, file_name=args.plot, show=False)
    return 0


def cmd_replay(args):
    status = 0
    for file_name in args.traces:
        report = replay_trace(file_name)
        print('{}: {}'.format(file_name, report))
        if not report.passed:
            status = 1
    return status


def cmd_ingest_statutes(args):
    if args.config:
        config = load_config(args.config)
        provider = make_embedder(config.embedding.validate())
        source = args.statutes or config.paths.statutes
    else:
        provider = make_embedder(EmbeddingProviderConfig())
        source = args.statutes
    if not source:
        print('No statute file given')
        return 1
    library = load_statutes(source, provider)
    print('{} statutes loaded from {}'.format(len(library), source))
    if args.query:
        for article_id, score in library.search(args.query, args.k):
            print('{:>8}  {:.4f}  {}'.format(article_id, score, library[article_id].title))
    return 0


def cmd_demo(args):
    if not args.run:
        config_file = write_demo(args.directory, n_cases=args.cases, seed=args.seed or 0)
        print('Demo bundle written; run it with: jurispanel infer --config {}'.format(config_file))
        return 0
    summaries = run_closed_loop(args.directory, n_cases=args.cases, seed=args.seed or 0)
    for name, summary in summaries.items():
        accuracies = ', '.join('epoch {}: {:.4f}'.format(e.epoch, e.article_accuracy()) for e in summary.epochs)
        print('{:<10} article accuracy {}'.format(name, accuracies))
    return 0 if all(s.ok for s in summaries.values()) else 1


def _add_common(p, memory=True):
    p.add_argument('--config', required=True, help='Run config (JSON)')
    p.add_argument('--seed', type=int, default=None, help='Override the random seed')
    if memory:
        p.add_argument('--no-memory', action='store_true', help='Run without memory injection (ablation)')
        p.add_argument('--concurrency', type=int, default=None, help='Cases judged at the same time')
        p.add_argument('--epochs', type=int, default=None, help='Passes over the corpus')


def build_parser():
    parser = argparse.ArgumentParser(prog='jurispanel', description='Collegial-panel legal judgment prediction with an evolving memory')
    parser.add_argument('--log-level', default='INFO', help='Logging level (default INFO)')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('infer', help='Judge a corpus, archive outcomes and evolve the memory')
    _add_common(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser('evolve', help='Run one evolution cycle on the persisted memory')
    _add_common(p, memory=False)
    p.add_argument('--force', action='store_true', help='Evolve even below the batch threshold')
    p.add_argument('--plot', default=None, help='Save a chart of the directive confidences to this file')
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser('build-alignment-data', help='Write SFT samples, faults and preference pairs')
    _add_common(p, memory=False)
    p.add_argument('--output', default=None, help='Output directory (default <output_dir>/alignment)')
    p.set_defaults(func=cmd_build_alignment_data)

    p = sub.add_parser('evaluate', help='Score a predictions file against a corpus')
    p.add_argument('--predictions', required=True, help='Predictions JSONL file')
    p.add_argument('--corpus', required=True, help='Corpus JSONL file with gold verdicts')
    p.add_argument('--term-bins', default='eleven', help='Term binning table: eleven or ten')
    p.add_argument('--average-over', default='gold', choices=('gold', 'all'))
    p.add_argument('--acc-mode', default='first', choices=('first', 'set'))
    p.add_argument('--output', default=None, help='Write the report to this file')
    p.add_argument('--plot', default=None, help='Save a bar chart of the report to this file')
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('replay', help='Verify traces by re-parsing every recorded response')
    p.add_argument('traces', nargs='+', help='Trace files')
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser('ingest-statutes', help='Load and check a statute file, optionally search it')
    p.add_argument('--statutes', default=None, help='Statute JSONL file (default: the config one)')
    p.add_argument('--config', default=None, help='Run config for the embedding provider')
    p.add_argument('--query', default=None, help='Text to search for')
    p.add_argument('-k', type=int, default=10, help='Number of results')
    p.set_defaults(func=cmd_ingest_statutes)

    p = sub.add_parser('demo', help='Write the synthetic demo bundle, optionally run the memory ablation')
    p.add_argument('directory', help='Bundle directory')
    p.add_argument('--cases', type=int, default=60, help='Number of synthetic cases')
    p.add_argument('--seed', type=int, default=None, help='Corpus seed')
    p.add_argument('--run', action='store_true', help='Run two epochs with and without memory')
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args)
    except JurisPanelError as e:
        logger.error('%s', e)
        return 1
    except (OSError, ValueError) as e:
        logger.error('%s', e)
        return 1


if __name__ == '__main__':
    sys.exit(main())
