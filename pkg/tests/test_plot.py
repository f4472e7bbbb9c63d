import os
import tempfile
import unittest

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt

from jurispanel.directives import DirectiveBase
from jurispanel.embedding import HashEmbedder
from jurispanel.metrics import Prediction, evaluate
from jurispanel.plot import plot_directive_confidence, plot_metrics
from jurispanel.verdict import TermOfImprisonment, Verdict


def verdict(article):
    return Verdict(articles=(article,), charges=('charge {}'.format(article),),
                   term=TermOfImprisonment(imprisonment_months=12))


class PlotTestCase(unittest.TestCase):
    def tearDown(self):
        plt.close('all')

    def test_plot_metrics(self):
        with_memory = evaluate([(Prediction(verdict(a)), verdict(a)) for a in (234, 264, 293)])
        without = evaluate([(Prediction(verdict(234)), verdict(a)) for a in (234, 264, 293)])
        with tempfile.TemporaryDirectory() as tmp:
            file_name = os.path.join(tmp, 'metrics.png')
            axs = plot_metrics({'memory': with_memory, 'no memory': without}, file_name=file_name,
                               show=False, return_axs=True)
            self.assertGreater(os.path.getsize(file_name), 0)
        self.assertEqual(len(axs), 3)
        self.assertEqual([ax.get_title() for ax in axs], ['article', 'charge', 'term'])
        # four metrics per run
        self.assertEqual(len(axs[0].patches), 8)
        self.assertRaises(ValueError, plot_metrics, {})

    def test_plot_directive_confidence(self):
        base = DirectiveBase(HashEmbedder())
        base.add_directive('Secret taking of property is theft.', [264])
        base.add_directive('Injury from a brawl started over nothing is picking quarrels.', [293])
        with tempfile.TemporaryDirectory() as tmp:
            file_name = os.path.join(tmp, 'directives.png')
            ax = plot_directive_confidence(base, file_name=file_name, show=False)
            self.assertGreater(os.path.getsize(file_name), 0)
        self.assertEqual([p.get_height() for p in ax.patches], [1.0, 1.0])
        self.assertEqual(ax.get_ylabel(), 'Confidence')
