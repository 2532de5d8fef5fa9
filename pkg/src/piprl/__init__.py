"""Program-guided reinforcement learning for mmWave indoor navigation."""
__version__ = "0.1.0"
