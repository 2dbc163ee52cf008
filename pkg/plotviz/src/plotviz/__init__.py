"""Figure rendering for the simulation CLI's CSV/JSON outputs."""

from .figures import (DEFAULT_STYLE, SCHEMA_VERSION, FigureRecipe, RecipeError,
                      SchemaError, __version__, load_recipe, load_style, main,
                      render)

__all__ = ["DEFAULT_STYLE", "SCHEMA_VERSION", "FigureRecipe", "RecipeError",
           "SchemaError", "__version__", "load_recipe", "load_style", "main",
           "render"]
