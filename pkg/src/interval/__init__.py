"""Interval arithmetic module"""
