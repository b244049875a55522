"""Built-in scenario documents."""
