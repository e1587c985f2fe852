"""Rectified axonal delay spiking networks."""
