# Test package for geoparquet-tools
