"""Command-line front end: configuration, result cache, output formats"""
