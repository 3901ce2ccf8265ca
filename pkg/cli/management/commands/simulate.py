from dataclasses import replace
from pathlib import Path

from cli.base import SeafloorCommand
from raster.serializers import load_document
from simulator.export import write_sequence
from simulator.serializers import SceneSerializer, TrajectorySerializer
from simulator.sequence import render_sequence, render_water_column


class Command(SeafloorCommand):
    help = 'Render a synthetic sequence with ground truth from a scene document'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--scene',
            required=True,
            help='Scene JSON document'
        )
        parser.add_argument(
            '--trajectory',
            default=None,
            help='Trajectory JSON document (default: a single frame at the scene pose)'
        )
        parser.add_argument(
            '--out-dir',
            required=True,
            help='Directory for frames, ground truth and manifests'
        )
        parser.add_argument('--depth', type=int, choices=(8, 16), default=16)

    def run(self, **options):
        scene_path = Path(options['scene'])
        serializer = load_document(scene_path, SceneSerializer, context={'base_dir': scene_path.parent})
        scene = serializer.save()
        if options['seed'] is not None:
            scene = replace(scene, seed=options['seed'])

        if options['trajectory']:
            trajectory = load_document(options['trajectory'], TrajectorySerializer).save()
        else:
            trajectory = [scene.pose]

        sequence = render_sequence(scene, trajectory)
        water_frames = None
        if scene.water_column is not None:
            water_frames, _ = render_water_column(scene)

        manifest = write_sequence(sequence, options['out_dir'], water_frames=water_frames, depth=options['depth'])
        self.stdout.write(self.style.SUCCESS(f'Rendered {len(sequence)} frames, manifest {manifest}'))
