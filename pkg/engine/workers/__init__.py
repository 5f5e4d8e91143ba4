from engine.workers.tile_pool import TilePool

__all__ = ["TilePool"]
