# REST identification endpoints
