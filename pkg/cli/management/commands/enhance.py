from django.conf import settings

from cli.base import SeafloorCommand
from estimation.config import ESTIMATORS, EnhancementConfig, ReferenceColor
from pipeline.batch import run_batch
from pipeline.manifest import read_manifest
from raster.fields import load_field
from raster.files import GAMMA_MODES
from robust_stats.sampling import WindowSpec


class Command(SeafloorCommand):
    help = 'Remove backscatter and lighting from every frame of a manifest'

    def add_command_arguments(self, parser):
        defaults = settings.SEAFLOOR
        parser.add_argument('--manifest', required=True, help='Frames in temporal order')
        parser.add_argument('--scatter', required=True, help='Scatter field TIFF written by estimate_scatter')
        parser.add_argument('--out-dir', required=True, help='Directory for enhanced frames and the run report')
        parser.add_argument(
            '--window',
            type=int,
            default=defaults['WINDOW'],
            help='Temporal median window (odd)'
        )
        parser.add_argument('--spatial-radius', type=int, default=defaults['SPATIAL_RADIUS'])
        parser.add_argument('--downsample', type=int, default=defaults['DOWNSAMPLE'])
        parser.add_argument(
            '--reference',
            default=defaults['REFERENCE'],
            help='Assumed seafloor colour, "r,g,b" or a single grey value'
        )
        parser.add_argument(
            '--epsilon',
            type=float,
            default=defaults['EPSILON'],
            help='Division floor; factor pixels below it are marked invalid'
        )
        parser.add_argument(
            '--static-factor',
            action='store_true',
            help='Estimate the factor once and reuse it for every frame'
        )
        parser.add_argument(
            '--dump-factors',
            action='store_true',
            help='Also write the per-frame factor fields'
        )
        parser.add_argument('--depth', type=int, choices=(8, 16), default=defaults['OUTPUT_DEPTH'])
        parser.add_argument('--estimator', choices=ESTIMATORS, default='median')
        parser.add_argument('--gamma', choices=GAMMA_MODES, default=None)

    def run(self, **options):
        config = EnhancementConfig(
            window=WindowSpec(options['window'], options['spatial_radius'], options['downsample']),
            reference=ReferenceColor.parse(options['reference']),
            epsilon=options['epsilon'],
            static_factor=options['static_factor'],
            estimator=options['estimator'],
            min_window=settings.SEAFLOOR['MIN_WINDOW'],
        )
        scatter = load_field(options['scatter'], expected_kind='scatter')
        paths = read_manifest(options['manifest'])
        report = run_batch(
            paths,
            scatter,
            config,
            options['out_dir'],
            dump_factors=options['dump_factors'],
            depth=options['depth'],
            gamma=options['gamma'],
        )
        self.stdout.write(
            self.style.SUCCESS(
                f"Enhanced {report.frames} frames into {options['out_dir']} "
                f"({report.frames_per_second:.2f} frames/s)"
            )
        )
        shrunk = sum(1 for size in report.window_sizes if size < config.window.n)
        if shrunk:
            self.stdout.write(self.style.WARNING(f'{shrunk} frames were enhanced with a shrunk window'))
