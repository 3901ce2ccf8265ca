"""
Base class for the seafloor management commands.

Adds the global ``--threads``, ``--verbose`` and ``--seed`` flags and turns
processing errors into CommandError exit codes:

    1  file could not be read or written
    2  invalid argument, document or input data
    3  metric undefined for the inputs
"""
import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from raster.exceptions import ImageIOError, MetricError, SeafloorError
from raster.parallel import configure
from raster.serializers import flatten_errors

EXIT_IO = 1
EXIT_ARGUMENT = 2
EXIT_METRIC = 3


class SeafloorCommand(BaseCommand):

    def add_arguments(self, parser):
        parser.add_argument(
            '--threads',
            type=int,
            default=settings.SEAFLOOR['THREADS'],
            help='Worker threads for pixel kernels (0 = one per CPU)'
        )
        parser.add_argument(
            '--verbose',
            action='store_true',
            help='Log per-frame detail'
        )
        parser.add_argument(
            '--seed',
            type=int,
            default=None,
            help='Random seed; overrides the seed of input documents'
        )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def run(self, **options):
        raise NotImplementedError('subclasses of SeafloorCommand must provide a run() method')

    def handle(self, *args, **options):
        levels = {}
        if options['verbose']:
            for app_name in settings.LOCAL_APPS:
                app_logger = logging.getLogger(app_name)
                levels[app_name] = app_logger.level
                app_logger.setLevel(logging.DEBUG)
        try:
            configure(options['threads'])
            self.run(**options)
        except ImageIOError as exc:
            raise CommandError(str(exc), returncode=EXIT_IO) from exc
        except MetricError as exc:
            raise CommandError(str(exc), returncode=EXIT_METRIC) from exc
        except SeafloorError as exc:
            raise CommandError(str(exc), returncode=EXIT_ARGUMENT) from exc
        except serializers.ValidationError as exc:
            raise CommandError('\n'.join(flatten_errors(exc.detail)), returncode=EXIT_ARGUMENT) from exc
        finally:
            configure(None)
            for app_name, level in levels.items():
                logging.getLogger(app_name).setLevel(level)
