"""Barrier function controller module"""
