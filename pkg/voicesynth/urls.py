from django.urls import path
from . import views

app_name = 'voicesynth'

urlpatterns = [
    path('', views.dashboard, name='dashboard'),
    path('runs/<int:pk>/', views.run_detail, name='run_detail'),
    path('reports/<int:pk>/', views.report_detail, name='report_detail'),
]
