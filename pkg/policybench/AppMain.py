#!/usr/bin/env python3
"""
PolicyBench command line
========================

Builds, runs, edits and measures robot task policies and reproduces the
benchmark experiments::

    policybench build --repr fsm --out build/
    policybench run --repr bt --scenario exp1_pick_failure --out traces/
    policybench edit --repr bt --script "add-recharge"
    policybench metrics build/bt.dot build/bt_edited.dot
    policybench reproduce all
    policybench --config lab.ini config

Exit status: 0 on success, 1 if a reproduced number does not match, 2 on
an input, parse or engine error.
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from ._metadata import __title__, __version__
from .AppSettings import (get_settings_file_path, load_settings,
                          save_settings, settings_manager, settings_report)
from .Graph import DirectedGraph
from .editing import edit
from .experiments import (EXPERIMENTS, FETCH_DOCUMENT, ReproductionMismatch,
                          reproduce)
from .graph_metrics import ged, graph_summary
from .policydsl import Document, load, load_fixture, save, serialize_policy
from .runner import (REPRESENTATIONS, RunConfig, run_many, select_policy,
                     write_trace)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_ERROR = 2

# =========================================================================

def _emit(args, record: dict, text: str):
    if args.format == 'record':
        print(json.dumps(record, sort_keys=True, indent=2))
    else:
        print(text, end='' if text.endswith('\n') else '\n')


def _document(args) -> Document:
    if args.doc:
        return load(args.doc)
    return load_fixture(FETCH_DOCUMENT)


def _out_dir(args) -> Optional[Path]:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _summary_text(summary: dict) -> str:
    text = (f"{summary['name']}: {summary['nodes']} nodes, "
            f"{summary['edges']} edges, {summary['sinks']} sinks")
    if summary['cc'] is not None:
        text += f", cc {summary['cc']}"
    return text

# -------------------------------------------------------------------------

def cmd_build(args) -> int:
    doc = _document(args)
    policy = select_policy(doc, args.repr)
    graph = policy.to_graph(args.repr)
    summary = graph_summary(graph)
    out = _out_dir(args)
    if out is not None:
        save(dataclasses.replace(doc, policy=policy),
             out / f"{args.repr}.pol")
        (out / f"{args.repr}.dot").write_text(graph.to_dot(),
                                              encoding='utf-8')
        logger.info('wrote %s.pol and %s.dot to %s', args.repr, args.repr,
                    out)
    record = dict(summary, representation=args.repr,
                  policy=serialize_policy(policy))
    _emit(args, record, serialize_policy(policy) + _summary_text(summary))
    return EXIT_OK


def cmd_run(args) -> int:
    doc = _document(args)
    scenarios = args.scenario or [None]
    configs = [RunConfig(doc, args.repr, scenario, threshold=args.threshold,
                         drain=args.drain, seed=args.seed,
                         budget=args.budget)
               for scenario in scenarios]
    results = run_many(configs, args.jobs)
    out = _out_dir(args)
    lines = []
    for result in results:
        if out is not None:
            name = result.scenario or 'default'
            write_trace(result, out / f"{args.repr}_{name}.jsonl")
        lines.append(f"{result.representation} {result.scenario}: "
                     f"{result.outcome} after {result.steps} steps\n"
                     f"  {' '.join(result.skill_trace)}")
    _emit(args, {'runs': [r.to_record() for r in results]},
          '\n'.join(lines))
    return EXIT_OK


def _script_text(script: str) -> str:
    path = Path(script)
    if path.suffix and path.is_file():
        return path.read_text(encoding='utf-8')
    return script


def cmd_edit(args) -> int:
    doc = _document(args)
    policy = select_policy(doc, args.repr)
    result = edit(policy, _script_text(args.script), doc.library())
    before = graph_summary(policy.to_graph('before'))
    after = graph_summary(result.policy.to_graph('after'))
    out = _out_dir(args)
    if out is not None:
        name = f"{args.repr}_edited"
        save(dataclasses.replace(doc, policy=result.policy),
             out / f"{name}.pol")
        (out / f"{name}.dot").write_text(result.policy.to_graph(name)
                                         .to_dot(), encoding='utf-8')
    receipt = result.receipt
    text = (f"{serialize_policy(result.policy)}"
            f"{_summary_text(before)}\n{_summary_text(after)}\n"
            f"{receipt.elementary_ops} elementary operations, "
            f"{receipt.touched} touched")
    _emit(args, {'before': before, 'after': after,
                 'receipt': result.to_record()}, text)
    return EXIT_OK


def _graph(path: str, representation: str) -> DirectedGraph:
    if Path(path).suffix == '.pol':
        return select_policy(load(path), representation) \
            .to_graph(Path(path).stem)
    return DirectedGraph.from_dot(Path(path).read_text(encoding='utf-8'))


def cmd_metrics(args) -> int:
    graphs = [_graph(p, args.repr) for p in args.graphs]
    summaries = [graph_summary(g) for g in graphs]
    record = {'graphs': summaries}
    lines = [_summary_text(s) for s in summaries]
    if len(graphs) == 2:
        result = ged(*graphs, budget=args.budget)
        record['ged'] = result.to_record()
        exact = 'exact' if result.exact else 'upper bound, not exact'
        lines.append(f"ged {record['ged']['distance']} ({exact})")
    _emit(args, record, '\n'.join(lines))
    return EXIT_OK


def cmd_reproduce(args) -> int:
    names = list(EXPERIMENTS) if 'all' in args.experiments \
        else args.experiments
    doc = load(args.doc) if args.doc else None
    reports = [reproduce(name, doc, args.jobs) for name in names]
    out = _out_dir(args)
    if out is not None:
        for report in reports:
            path = out / f"{report.experiment}.json"
            path.write_text(json.dumps(report.to_record(), sort_keys=True,
                                       indent=2) + '\n', encoding='utf-8')
            logger.info('wrote report %s', path)
    _emit(args, {'reports': [r.to_record() for r in reports]},
          ''.join(r.to_text() for r in reports))
    for report in reports:
        report.raise_for_mismatch()
    return EXIT_OK


def cmd_config(args) -> int:
    if args.save:
        if not save_settings():
            raise OSError(f"cannot write {get_settings_file_path()}")
        logger.info('wrote %s', get_settings_file_path())
    if args.format == 'record':
        record = {'path': get_settings_file_path()}
        for name, group in settings_manager.groups().items():
            record[name] = {key: {'value': value, 'default': default}
                            for key, value, default, _ in group.items()}
        _emit(args, record, '')
    else:
        _emit(args, {}, settings_report())
    return EXIT_OK

# =========================================================================

def _add_common(parser: argparse.ArgumentParser, representation=True):
    parser.add_argument('--doc', help='policy document (.pol), the '
                        'packaged fetch task by default')
    if representation:
        parser.add_argument('--repr', choices=REPRESENTATIONS, default='bt',
                            help='policy representation (default: bt)')
    parser.add_argument('--out', help='output directory')
    parser.add_argument('--format', choices=('text', 'record'),
                        default='text', help='output format')


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=__title__,
        description='Compare behavior trees with fault-tolerant state '
                    'machines on robot fetch tasks.')
    parser.add_argument('--version', action='version',
                        version=f"%(prog)s {__version__}")
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='more log output (repeatable)')
    parser.add_argument('-q', '--quiet', action='store_true',
                        help='only log errors')
    parser.add_argument('--config', help='alternative settings file (INI)')
    commands = parser.add_subparsers(dest='command', required=True)

    build = commands.add_parser('build', help='synthesize a policy')
    _add_common(build)
    build.set_defaults(func=cmd_build)

    run = commands.add_parser('run', help='run a policy in a scenario')
    _add_common(run)
    run.add_argument('--scenario', action='append',
                     help='scenario name (repeatable), the first by default')
    run.add_argument('--budget', type=int, default=None,
                     help='step budget')
    run.add_argument('--threshold', type=float, default=None,
                     help='battery threshold override (percent)')
    run.add_argument('--drain', type=float, default=None,
                     help='battery drain override (percent per step)')
    run.add_argument('--seed', type=int, default=None,
                     help='seed of the random failure injection')
    run.add_argument('--jobs', type=int, default=1,
                     help='scenarios run in parallel')
    run.set_defaults(func=cmd_run)

    edit_cmd = commands.add_parser('edit', help='apply an edit script')
    _add_common(edit_cmd)
    edit_cmd.add_argument('--script', required=True,
                          help='edit script file or inline commands')
    edit_cmd.set_defaults(func=cmd_edit)

    metrics = commands.add_parser('metrics', help='graph metrics and GED')
    metrics.add_argument('graphs', nargs='+', metavar='GRAPH',
                         help='one or two DOT files or .pol documents')
    metrics.add_argument('--repr', choices=REPRESENTATIONS, default='bt',
                         help='representation taken from .pol documents')
    metrics.add_argument('--budget', type=int, default=None,
                         help='GED search expansion budget')
    metrics.add_argument('--format', choices=('text', 'record'),
                         default='text', help='output format')
    metrics.set_defaults(func=cmd_metrics)

    repro = commands.add_parser('reproduce',
                                help='reproduce the experiments')
    repro.add_argument('experiments', nargs='+',
                       choices=list(EXPERIMENTS) + ['all'],
                       metavar='EXPERIMENT',
                       help=f"{', '.join(EXPERIMENTS)} or all")
    _add_common(repro, representation=False)
    repro.add_argument('--jobs', type=int, default=1,
                       help='scenarios run in parallel')
    repro.set_defaults(func=cmd_reproduce)

    config = commands.add_parser('config', help='show the settings in effect')
    config.add_argument('--save', action='store_true',
                        help='write them to the settings file first')
    config.add_argument('--format', choices=('text', 'record'),
                        default='text', help='output format')
    config.set_defaults(func=cmd_config)
    return parser


def _configure_logging(args):
    if args.quiet:
        level = logging.ERROR
    else:
        level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose,
                                                         logging.DEBUG)
    logging.basicConfig(level=level,
                        format='%(levelname)s %(name)s: %(message)s')


def main(argv: Optional[List[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    load_settings(args.config)
    if getattr(args, 'jobs', 1) < 1:
        parser.error('--jobs must be at least 1')
    try:
        return args.func(args)
    except ReproductionMismatch as e:
        logger.error('%s', e)
        return EXIT_MISMATCH
    except (ValueError, KeyError, OSError) as e:
        logger.error('%s: %s', type(e).__name__, e)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
