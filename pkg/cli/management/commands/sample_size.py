import math

from cli.base import SeafloorCommand
from robust_stats.sampling import ContaminationModel, log_p_half, required_window, sample_size_table


class Command(SeafloorCommand):
    help = 'Print the temporal window needed for a contamination rate and failure target'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--contamination',
            type=float,
            required=True,
            help='Probability that a sample shows something other than seafloor (0 < c < 0.5)'
        )
        parser.add_argument(
            '--target',
            type=float,
            default=0.05,
            help='Acceptable probability that the median of a pixel breaks down'
        )

    def run(self, **options):
        c = ContaminationModel(options['contamination']).c
        target = options['target']
        required = required_window(c, target)

        self.stdout.write(f"{'n':>6}  {'p_half':>12}  {'log10 p_half':>13}")
        for n, probability in sample_size_table(c, target):
            log10 = log_p_half(c, n) / math.log(10)
            self.stdout.write(f'{n:>6}  {probability:>12.4g}  {log10:>13.3f}')
        self.stdout.write(
            self.style.SUCCESS(f'Required window for c={c:g}, target={target:g}: n = {required}')
        )
