"""
WSGI entry point for the SingLab run dashboard and admin.

Training and synthesis never go through here; they run as manage.py
commands. Serve with any WSGI server pointed at ``application``.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'singlab_project.settings')

application = get_wsgi_application()
