from pathlib import Path
import os
import secrets

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')

SECRET_KEY = os.getenv('SECRET_KEY', secrets.token_urlsafe(50))

DEBUG = os.getenv('DEBUG', 'False').lower() in ('true', '1', 'yes')


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'autodiff',
    'systems',
    'lie',
    'synthesis',
    'filters',
    'sim',
    'scenarios',
]

# No tables: every domain type is an in-memory dataclass.
DATABASES = {}

TIME_ZONE = os.getenv('TIME_ZONE', 'UTC')

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging configuration

LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
LOG_FILE = os.getenv('LOG_FILE')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        }
        for app in ('autodiff', 'systems', 'lie', 'synthesis', 'filters', 'sim', 'scenarios')
    },
}

if LOG_FILE:
    LOGGING['handlers']['file'] = {
        'level': 'INFO',
        'class': 'logging.FileHandler',
        'filename': LOG_FILE,
        'formatter': 'verbose',
    }
    for logger in LOGGING['loggers'].values():
        logger['handlers'].append('file')
    LOGGING['root']['handlers'].append('file')


# REST Framework settings (serializers and JSON rendering only)
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': ['rest_framework.renderers.JSONRenderer'],
    'UNICODE_JSON': False,
    'STRICT_JSON': True,
}


# Overrides for the numerical defaults in core/conf.py, read from BARRIER_<NAME> variables
BARRIERS = {
    name[len('BARRIER_'):]: value
    for name, value in os.environ.items() if name.startswith('BARRIER_')
}
