import logging
from pathlib import Path

from cli.base import SeafloorCommand
from metrics.composite import composite
from metrics.consistency import NORMS, consistency_error
from metrics.registration import load_registration
from metrics.rmse import scale_invariant_rmse
from pipeline.manifest import read_manifest
from raster.exceptions import ArgumentError
from raster.files import load_frame, load_mask, save_frame
from raster.serializers import write_document

logger = logging.getLogger(__name__)


def coverage_path(frame_path):
    """Coverage mask written by enhance next to ``frame_path``, or None"""
    frame_path = Path(frame_path)
    stem = frame_path.stem
    candidates = [frame_path.with_name(f"{stem}_coverage.png")]
    if stem.endswith('_enhanced'):
        candidates.append(frame_path.with_name(f"{stem[:-len('_enhanced')]}_coverage.png"))
    for candidate in candidates:
        if candidate.exists():
            return candidate
    return None


class Command(SeafloorCommand):
    help = 'Measure the consistency of registered frames, and their error against ground truth'

    def add_command_arguments(self, parser):
        parser.add_argument('--frames', required=True, help='Manifest of frames to evaluate')
        parser.add_argument(
            '--registration',
            required=True,
            help='Registration document (homographies or correspondence maps)'
        )
        parser.add_argument(
            '--truth',
            default=None,
            help='Manifest of ground-truth albedo frames, one per evaluated frame'
        )
        parser.add_argument('--out', required=True, help='Output JSON report')
        parser.add_argument(
            '--region-mask',
            default=None,
            help='PNG mask in mosaic space; reports the error inside and outside it'
        )
        parser.add_argument('--norm', choices=NORMS, default='mae')
        parser.add_argument(
            '--cell-size',
            type=float,
            default=None,
            help='Mosaic cell size in meters when registering from correspondence maps'
        )
        parser.add_argument(
            '--composite',
            default=None,
            help='Also write a blended mosaic of the frames to this path'
        )

    def run(self, **options):
        paths = read_manifest(options['frames'])
        registration = load_registration(options['registration'], cell_size=options['cell_size'])
        if len(paths) != len(registration):
            raise ArgumentError(
                f"Registration covers {len(registration)} frames, the manifest lists {len(paths)}"
            )
        frames = [load_frame(path, index=i) for i, path in enumerate(paths)]
        region_mask = load_mask(options['region_mask']) if options['region_mask'] else None

        report = consistency_error(frames, registration, region_mask=region_mask, norm=options['norm'])

        if options['truth']:
            truth_paths = read_manifest(options['truth'])
            if len(truth_paths) != len(paths):
                raise ArgumentError(
                    f"Truth manifest lists {len(truth_paths)} frames, the frame manifest {len(paths)}"
                )
            report.truth_rmse = []
            for frame, path, truth_path in zip(frames, paths, truth_paths):
                mask_file = coverage_path(path)
                mask = load_mask(mask_file) if mask_file else None
                errors = scale_invariant_rmse(frame, load_frame(truth_path), mask)
                report.truth_rmse.append([float(e) for e in errors])
                logger.debug(f"Truth error of {path}: {errors}")

        write_document(options['out'], report.as_dict())

        self.stdout.write(f"{'':<10}" + ''.join(f'{f"ch{c}":>10}' for c in range(len(report.errors))))
        self.stdout.write(f"{report.norm:<10}" + ''.join(f'{e:>10.4f}' for e in report.errors))
        for name, region in report.regions.items():
            if region is None:
                self.stdout.write(self.style.WARNING(f'{name}: no overlap pixels'))
            else:
                self.stdout.write(f"{name:<10}" + ''.join(f'{e:>10.4f}' for e in region.errors))
        if report.truth_rmse is not None:
            channels = len(report.truth_rmse[0])
            means = [sum(row[c] for row in report.truth_rmse) / len(report.truth_rmse) for c in range(channels)]
            self.stdout.write(f"{'truth':<10}" + ''.join(f'{e:>10.4f}' for e in means))

        if options['composite']:
            save_frame(composite(frames, registration), options['composite'], clamp=True)
            self.stdout.write(f"Wrote composite {options['composite']}")

        self.stdout.write(
            self.style.SUCCESS(
                f"Evaluated {len(frames)} frames over {report.overlap_pixel_count} overlap pixels, "
                f"report {options['out']}"
            )
        )
