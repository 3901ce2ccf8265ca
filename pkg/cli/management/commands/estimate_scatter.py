from pathlib import Path

from cli.base import SeafloorCommand
from estimation.scatter import MIN_WATER_FRAMES, estimate_scatter
from pipeline.manifest import read_manifest
from raster.exceptions import ArgumentError
from raster.fields import save_field
from raster.files import GAMMA_MODES, load_frame


class Command(SeafloorCommand):
    help = 'Estimate the backscatter field from frames that only show the water column'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--water-manifest',
            required=True,
            help='Manifest of water-column frames'
        )
        parser.add_argument(
            '--out',
            required=True,
            help='Output TIFF; a JSON sidecar is written next to it'
        )
        parser.add_argument(
            '--gamma',
            choices=GAMMA_MODES,
            default=None,
            help='Input transfer function (default: sRGB for 8-bit, linear for 16-bit)'
        )

    def run(self, **options):
        out = Path(options['out'])
        if out.suffix.lower() not in ('.tif', '.tiff'):
            raise ArgumentError(f"--out must be a .tif path, got {out}")
        paths = read_manifest(options['water_manifest'])
        if len(paths) < MIN_WATER_FRAMES:
            raise ArgumentError(
                f"Scatter estimation needs at least {MIN_WATER_FRAMES} water-column frames, "
                f"the manifest lists {len(paths)}"
            )
        frames = [load_frame(path, gamma=options['gamma'], index=i) for i, path in enumerate(paths)]
        scatter = estimate_scatter(frames)
        save_field(scatter, out)
        self.stdout.write(
            self.style.SUCCESS(
                f'Wrote scatter field {out} ({scatter.width}x{scatter.height}, '
                f'{scatter.channels} channels) from {len(frames)} frames'
            )
        )
