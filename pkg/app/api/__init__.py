# REST API package
