# asymptotica/routers/__init__.py
