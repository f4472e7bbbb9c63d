import matplotlib.pyplot as plt
import numpy as np

from .metrics import SUBTASKS

_METRICS = (('acc', 'Acc'), ('macro_p', 'MP'), ('macro_r', 'MR'), ('macro_f1', 'MF1'))


def plot_metrics(reports, file_name=None, figsize=(18, 6), show=True, axs=None, return_axs=False, *args, **kwargs):
    """
    This function draws one bar chart per subtask (articles, charges, term), with one group of
    bars per metric and one bar per report.

    Args:
        - reports (``dict``): run name -> `jurispanel.metrics.MetricsReport`
        - file_name (``str``): name of the file (including path) where the plot is saved; not saved if None
        - figsize (``tuple``): figure size
        - show (``bool``): show the figure
        - axs (``numpy.ndarray``): three axes to draw on (created if None)
        - return_axs (``bool``): return the axes
        - *args, **kwargs: additional arguments passed to the bar function

    Returns:
        - axs (``numpy.ndarray``): array of AxesSubplot objects, when ``return_axs`` is set
    """
    if not reports:
        raise ValueError('nothing to plot')
    fig = None
    if axs is None:
        fig, axs = plt.subplots(1, len(SUBTASKS), figsize=figsize, sharey=True)
    names = list(reports)
    x = np.arange(len(_METRICS))
    width = 0.8 / len(names)
    for ax, subtask in zip(axs, SUBTASKS):
        for i, name in enumerate(names):
            m = reports[name].subtasks[subtask]
            values = [100 * getattr(m, key) for key, _ in _METRICS]
            ax.bar(x + i * width - 0.4 + width / 2, values, width, label=name, *args, **kwargs)
        ax.set_xticks(x)
        ax.set_xticklabels([label for _, label in _METRICS])
        ax.set_title(subtask)
        ax.set_ylim(0, 100)
        ax.grid(True, axis='y')
    axs[0].set_ylabel('%')
    axs[-1].legend()
    plt.tight_layout()

    if file_name is not None:
        (fig or axs[0].figure).savefig(fname=file_name)
    if show and not return_axs:
        plt.show()

    if return_axs:
        return axs


def plot_directive_confidence(base, file_name=None, figsize=(12, 6), show=True, ax=None, *args, **kwargs):
    """
    This function draws the confidence of every directive, with the pruning threshold and the
    confidence ceiling as horizontal lines.

    Args:
        - base (``jurispanel.directives.DirectiveBase``): directive base
        - file_name (``str``): name of the file where the plot is saved; not saved if None
        - figsize (``tuple``): figure size
        - show (``bool``): show the figure
        - ax (``matplotlib.axes.Axes``): axis to draw on (created if None)

    Returns:
        - ax (``matplotlib.axes.Axes``)
    """
    if ax is None:
        fig, ax = plt.subplots(figsize=figsize)
    directives = base.directives()
    ids = [str(d.directive_id) for d in directives]
    ax.bar(ids, [d.confidence for d in directives], *args, **kwargs)
    ax.axhline(base.config.prune_threshold, color='red', linestyle='--', label='prune threshold')
    ax.axhline(base.config.tau_max, color='black', linestyle=':', label='ceiling')
    ax.set_xlabel('Directive')
    ax.set_ylabel('Confidence')
    ax.legend()
    ax.grid(True, axis='y')
    plt.tight_layout()
    if file_name is not None:
        ax.figure.savefig(fname=file_name)
    if show:
        plt.show()
    return ax
