"""
DJANGO SETTINGS - Configuration for the SingLab toolkit

This file holds the process-level configuration of the singing-voice-synthesis
toolkit. Experiment hyperparameters live in JSON config files validated by
voicesynth.config; only things that depend on the machine or deployment are
read here.

Key Configuration Areas:
- Security: SECRET_KEY, DEBUG, ALLOWED_HOSTS (for the run dashboard)
- Database: SQLite for local runs, PostgreSQL when DATABASE_URL is set
- Toolkit: data directory, torch device, default seed, checkpoint cadence
- Logging: console logging for training loops and management commands
"""

# === IMPORTS FOR CONFIGURATION ===
from pathlib import Path  # Modern Python path handling
from decouple import config  # Environment variable management (keeps secrets out of code)
import os  # Operating system interface
import dj_database_url  # Database URL parsing

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# === SECURITY SETTINGS ===

# SECRET_KEY: Used for cryptographic signing (sessions, CSRF, etc.)
SECRET_KEY = config('SECRET_KEY', default='django-insecure-singlab-local-key')

# DEBUG: Controls error display and development features
DEBUG = config('DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = config(
    'ALLOWED_HOSTS',
    default='localhost,127.0.0.1'
).split(',')


# === APPLICATION CONFIGURATION ===
INSTALLED_APPS = [
    # Django Built-in Apps (core functionality)
    'django.contrib.admin',         # Admin interface at /admin/ (run ledger browsing)
    'django.contrib.auth',          # User authentication system
    'django.contrib.contenttypes',  # Content type framework
    'django.contrib.sessions',      # Session management
    'django.contrib.messages',      # Flash messaging framework
    'django.contrib.staticfiles',   # Static file handling for the admin

    # Local Apps (our custom applications)
    'voicesynth',  # Score frontend, features, models, training and the run ledger
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'whitenoise.middleware.WhiteNoiseMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'singlab_project.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'singlab_project.wsgi.application'


# Database
# Use PostgreSQL when DATABASE_URL is provided, SQLite locally
if 'DATABASE_URL' in os.environ:
    DATABASES = {
        'default': dj_database_url.config(conn_max_age=600)
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': BASE_DIR / 'db.sqlite3',
        }
    }


AUTH_PASSWORD_VALIDATORS = [
    {
        'NAME': (
            'django.contrib.auth.password_validation.'
            'MinimumLengthValidator'
        ),
    },
]


# Internationalization
LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Static files (admin CSS/JS)
STATIC_URL = '/static/'
STATIC_ROOT = os.path.join(BASE_DIR, 'staticfiles')

STORAGES = {
    'staticfiles': {
        'BACKEND': 'whitenoise.storage.CompressedManifestStaticFilesStorage',
    },
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

LOGIN_URL = '/admin/login/'


# === TOOLKIT SETTINGS ===

# torch device for training and synthesis ("cpu", "cuda", "cuda:1", ...)
SINGLAB_DEVICE = config('SINGLAB_DEVICE', default='cpu')

# Seed used when a command is run without --seed
SINGLAB_DEFAULT_SEED = config('SINGLAB_DEFAULT_SEED', default=1234, cast=int)

# Training steps between checkpoints; only the newest checkpoint is kept
SINGLAB_CHECKPOINT_EVERY = config('SINGLAB_CHECKPOINT_EVERY', default=1000, cast=int)

SINGLAB_LOG_LEVEL = config('SINGLAB_LOG_LEVEL', default='INFO')


# === LOGGING ===
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'voicesynth': {
            'handlers': ['console'],
            'level': SINGLAB_LOG_LEVEL,
            'propagate': False,
        },
    },
}
