"""
URL configuration for singlab_project.

The toolkit is driven from manage.py; the web surface only exposes the
admin and a read-only JSON view of the run ledger.
"""
from django.contrib import admin
from django.urls import path, include

urlpatterns = [
    path('admin/', admin.site.urls),
    path('', include('voicesynth.urls')),
]
