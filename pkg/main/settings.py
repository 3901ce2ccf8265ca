"""
Django settings for the seafloor lighting-compensation project.

The project has no web surface: Django provides settings, logging,
management commands and the test runner. Processing defaults live in the
SEAFLOOR dictionary and can be overridden through environment variables or
a .env file.
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


SECRET_KEY = config("SECRET_KEY", default="seafloor-insecure-local-key")

DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    # Third party apps
    'rest_framework',

    # Local apps
    'raster',
    'robust_stats',
    'estimation',
    'pipeline',
    'simulator',
    'metrics',
    'cli',
]

# No models anywhere in the project.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# Django REST Framework is used for its serializers only.
REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
}


# Processing defaults: median over 7 frames, 3x3 spatial median,
# downsample by 8, grey reference.
SEAFLOOR = {
    'WINDOW': config('SEAFLOOR_WINDOW', default=7, cast=int),
    'SPATIAL_RADIUS': config('SEAFLOOR_SPATIAL_RADIUS', default=1, cast=int),
    'DOWNSAMPLE': config('SEAFLOOR_DOWNSAMPLE', default=8, cast=int),
    'REFERENCE': config('SEAFLOOR_REFERENCE', default='0.5,0.5,0.5'),
    'EPSILON': config('SEAFLOOR_EPSILON', default=1e-4, cast=float),
    'THREADS': config('SEAFLOOR_THREADS', default=0, cast=int),
    'OUTPUT_DEPTH': config('SEAFLOOR_OUTPUT_DEPTH', default=16, cast=int),
    'MIN_WINDOW': config('SEAFLOOR_MIN_WINDOW', default=3, cast=int),
}


# Logging Configuration
LOG_LEVEL = config('SEAFLOOR_LOG_LEVEL', default='INFO')
LOG_FILE = config('SEAFLOOR_LOG_FILE', default='')

LOCAL_APPS = ['raster', 'robust_stats', 'estimation', 'pipeline', 'simulator', 'metrics', 'cli']
LOG_HANDLERS = ['console', 'file'] if LOG_FILE else ['console']

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'standard': {
            'format': '%(levelname)s %(asctime)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'standard',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': True,
        },
    },
}

if LOG_FILE:
    LOGGING['handlers']['file'] = {
        'level': 'DEBUG',
        'class': 'logging.FileHandler',
        'filename': LOG_FILE,
        'formatter': 'standard',
    }

for app_name in LOCAL_APPS:
    LOGGING['loggers'][app_name] = {
        'handlers': LOG_HANDLERS,
        'level': LOG_LEVEL,
        'propagate': False,
    }
