import dataclasses

import numpy as np
from sklearn.metrics import precision_recall_fscore_support

from . import util
from .verdict import ELEVEN_CLASS_BINS, bin_term

SUBTASKS = ('article', 'charge', 'term')

# class used when a prediction names no article or no charge
NO_ARTICLE = -1
NO_CHARGE = ''


@dataclasses.dataclass(frozen=True)
class Prediction:
    """A verdict with optional top-k rankings, for evaluation without a panel run."""
    verdict: object
    ranked_articles: tuple = None
    ranked_charges: tuple = None


@dataclasses.dataclass(frozen=True)
class SubtaskMetrics:
    acc: float
    macro_p: float
    macro_r: float
    macro_f1: float


@dataclasses.dataclass
class MetricsReport:
    subtasks: dict
    hit_at_2: dict
    evaluated: int
    skipped: int = 0

    def to_dict(self):
        return report_to_dict(self)


def _first(values, empty):
    return values[0] if values else empty


def _macro(y_true, y_pred, average_over):
    if average_over == 'gold':
        labels = sorted(set(y_true))
    else:
        labels = sorted(set(y_true) | set(y_pred))
    p, r, f, _ = precision_recall_fscore_support(y_true, y_pred, labels=labels, average='macro', zero_division=0)
    return float(p), float(r), float(f)


def evaluate(results, bins=ELEVEN_CLASS_BINS, average_over='gold', acc_mode='first', skipped=0):
    """
    This function scores predictions against gold verdicts: accuracy, macro precision, recall
    and F1 per subtask (articles, charges, term class), and top-2 hit rates for articles and
    charges. Articles and charges are scored on their first listed element.

    Args:
        - results (``list``): ``(prediction, gold)`` tuples; a prediction is a `jurispanel.workflow.CaseResult` or a `Prediction`
        - bins (``jurispanel.verdict.TermBins``): term binning table
        - average_over (``str``): ``'gold'`` (classes present in gold) or ``'all'`` (gold and predicted classes)
        - acc_mode (``str``): ``'first'`` (first element) or ``'set'`` (exact set match) for article and charge accuracy
        - skipped (``int``): number of failed cases, carried into the report

    Returns:
        - ``jurispanel.metrics.MetricsReport``
    """
    results = list(results)
    if not results:
        raise ValueError('cannot evaluate an empty result list')
    if average_over not in ('gold', 'all'):
        raise ValueError('average_over must be gold or all, got {}'.format(average_over))
    if acc_mode not in ('first', 'set'):
        raise ValueError('acc_mode must be first or set, got {}'.format(acc_mode))
    y = {name: ([], []) for name in SUBTASKS}
    exact = {'article': [], 'charge': []}
    hits = {'article': [], 'charge': []}
    for pred, gold in results:
        v = pred.verdict
        ranked_articles = list(pred.ranked_articles) if pred.ranked_articles is not None else list(v.articles)
        ranked_charges = list(pred.ranked_charges) if pred.ranked_charges is not None else list(v.charges)
        pairs = {'article': (_first(gold.articles, NO_ARTICLE), _first(v.articles, NO_ARTICLE)),
                 'charge': (_first(gold.charges, NO_CHARGE), _first(v.charges, NO_CHARGE)),
                 'term': (bin_term(gold.term, bins).class_index, bin_term(v.term, bins).class_index)}
        for name, (t, p) in pairs.items():
            y[name][0].append(t)
            y[name][1].append(p)
        exact['article'].append(set(v.articles) == set(gold.articles))
        exact['charge'].append(set(v.charges) == set(gold.charges))
        for name, ranked in (('article', ranked_articles), ('charge', ranked_charges)):
            t, p = pairs[name]
            # an accurate prediction is always a hit
            accurate = exact[name][-1] if acc_mode == 'set' else t == p
            hits[name].append(accurate or t in ranked[:2])
    subtasks = {}
    for name in SUBTASKS:
        y_true, y_pred = y[name]
        if acc_mode == 'set' and name in exact:
            acc = float(np.mean(exact[name]))
        else:
            acc = float(np.mean([t == p for t, p in zip(y_true, y_pred)]))
        subtasks[name] = SubtaskMetrics(acc, *_macro(y_true, y_pred, average_over))
    return MetricsReport(subtasks=subtasks, hit_at_2={k: float(np.mean(v)) for k, v in hits.items()},
                         evaluated=len(results), skipped=skipped)


def report_to_dict(report):
    return {'subtasks': {name: dataclasses.asdict(m) for name, m in report.subtasks.items()},
            'hit_at_2': dict(report.hit_at_2), 'evaluated': report.evaluated, 'skipped': report.skipped}


def report_from_dict(d):
    return MetricsReport(subtasks={name: SubtaskMetrics(**m) for name, m in d['subtasks'].items()},
                         hit_at_2=dict(d['hit_at_2']), evaluated=d['evaluated'], skipped=d.get('skipped', 0))


def format_report(report):
    """
    This function renders a report as a fixed-width table (percentages).
    """
    lines = ['{:<10}{:>9}{:>9}{:>9}{:>9}{:>9}'.format('subtask', 'Acc', 'MP', 'MR', 'MF1', 'Hit@2')]
    for name in SUBTASKS:
        m = report.subtasks[name]
        hit = report.hit_at_2.get(name)
        lines.append('{:<10}{:>9.2f}{:>9.2f}{:>9.2f}{:>9.2f}{:>9}'.format(
            name, 100 * m.acc, 100 * m.macro_p, 100 * m.macro_r, 100 * m.macro_f1,
            '-' if hit is None else '{:.2f}'.format(100 * hit)))
    lines.append('evaluated: {}  skipped: {}'.format(report.evaluated, report.skipped))
    return '\n'.join(lines)


def write_report(file_name, report):
    with open(file_name, 'w', encoding='utf-8') as f:
        f.write(util.dumps(report_to_dict(report)) + '\n')
